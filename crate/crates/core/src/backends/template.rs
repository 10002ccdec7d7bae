use super::{
    LayoutReply, LayoutRequest, MergeDivideReply, MergeDivideRequest, PlannerBackend, RecaptionReply,
    RecaptionRequest,
};
use crate::error::PlanError;
use crate::planner::{merge_or_divide, recaption_with_template, solve_layout};

/// Rule-based planner: template captions, greedy merge/divide and the
/// constraint layout solver. Needs no network and no fixtures.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplatePlanner;

impl PlannerBackend for TemplatePlanner {
    fn name(&self) -> &str {
        "template"
    }

    fn recaption(&self, req: &RecaptionRequest) -> Result<RecaptionReply, PlanError> {
        Ok(RecaptionReply {
            subprompts: recaption_with_template(&req.entities, &req.attributes, &req.spatial),
        })
    }

    fn merge_divide(&self, req: &MergeDivideRequest) -> Result<MergeDivideReply, PlanError> {
        merge_or_divide(req)
    }

    fn layout(&self, req: &LayoutRequest) -> Result<LayoutReply, PlanError> {
        Ok(LayoutReply { boxes: solve_layout(&req.prompts, &req.relations)? })
    }
}
