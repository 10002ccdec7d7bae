use crate::composer::grid::mismatch;
use crate::error::ComposeError;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix, ComposeError> {
        if data.len() != rows * cols {
            return Err(mismatch(format!("{} values", rows * cols), format!("{} values", data.len())));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, ComposeError> {
        if self.cols != rhs.rows {
            return Err(mismatch(format!("{} rows", self.cols), format!("{} rows", rhs.rows)));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(rhs.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.get(r, c);
            }
        }
        out
    }
}

/// Token embeddings of one prompt, `tokens × embed_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptEmbedding {
    pub values: Matrix,
}

impl PromptEmbedding {
    pub fn new(values: Matrix) -> Result<PromptEmbedding, ComposeError> {
        if values.rows() == 0 {
            return Err(ComposeError::InvalidLatent("prompt embedding has no tokens".into()));
        }
        if values.data().iter().any(|v| !v.is_finite()) {
            return Err(ComposeError::InvalidLatent("prompt embedding is not finite".into()));
        }
        Ok(PromptEmbedding { values })
    }

    pub fn tokens(&self) -> usize {
        self.values.rows()
    }
}

/// Query, key and value projections. `wq` maps latent features to `dim`,
/// `wk` and `wv` map text features to `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
}

impl AttentionWeights {
    pub fn new(wq: Matrix, wk: Matrix, wv: Matrix) -> Result<AttentionWeights, ComposeError> {
        if wq.cols() != wk.cols() || wk.cols() != wv.cols() || wq.cols() == 0 {
            return Err(mismatch(
                format!("projection width {}", wq.cols()),
                format!("{} / {}", wk.cols(), wv.cols()),
            ));
        }
        if wk.rows() != wv.rows() {
            return Err(mismatch(
                format!("{} text features", wk.rows()),
                format!("{} text features", wv.rows()),
            ));
        }
        Ok(AttentionWeights { wq, wk, wv })
    }

    pub fn dim(&self) -> usize {
        self.wq.cols()
    }
}

/// Row-wise softmax, shifted by the row max for stability.
pub fn softmax_rows(m: &mut Matrix) {
    let cols = m.cols;
    for row in m.data.chunks_exact_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// `softmax(Q·Kᵀ / √d) · V` with `Q = latent·wq`, `K = text·wk`, `V = text·wv`.
///
/// `latent_embed` is `cells × latent_features`; the result is `cells × dim`.
pub fn cross_attention(
    latent_embed: &Matrix,
    prompt: &PromptEmbedding,
    weights: &AttentionWeights,
) -> Result<Matrix, ComposeError> {
    let q = latent_embed.matmul(&weights.wq)?;
    let k = prompt.values.matmul(&weights.wk)?;
    let v = prompt.values.matmul(&weights.wv)?;
    let mut scores = q.matmul(&k.transpose())?;
    let scale = 1.0 / libm::sqrt(weights.dim() as f64);
    scores.data.iter_mut().for_each(|s| *s *= scale);
    softmax_rows(&mut scores);
    scores.matmul(&v)
}
