//! SVG rendering of a plan's layout for inspection.
//!
//! The drawing uses a unit view box, so every rectangle carries the plan's box
//! coordinates verbatim.

use std::fmt::Write;

use crate::planner::CompositionPlan;

const PIXELS: u32 = 512;
const PALETTE: [&str; 6] = ["#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#008080"];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_layout(plan: &CompositionPlan) -> String {
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PIXELS}" height="{PIXELS}" viewBox="0 0 1 1">"#
    )
    .unwrap();
    writeln!(
        out,
        r##"  <rect class="background" x="0" y="0" width="1" height="1" fill="#f4f1ea"><title>{}</title></rect>"##,
        escape(&plan.background.text)
    )
    .unwrap();
    for (i, placed) in plan.foreground.iter().enumerate() {
        let b = placed.bbox.rounded();
        let color = PALETTE[i % PALETTE.len()];
        let text = escape(&placed.prompt.text);
        writeln!(
            out,
            r#"  <rect class="region" data-index="{i}" x="{}" y="{}" width="{}" height="{}" fill="{color}" fill-opacity="0.2" stroke="{color}" stroke-width="0.004"><title>{text}</title></rect>"#,
            b.x, b.y, b.w, b.h
        )
        .unwrap();
        writeln!(
            out,
            r#"  <text x="{}" y="{}" font-size="0.03" font-family="sans-serif" fill="{color}">{text}</text>"#,
            b.x + 0.01,
            b.y + 0.04
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
