use crate::gateway::Tier;
use crate::prompts::ModuleKind;

/// Question styles a student can pick for practice exams.
pub const EXAM_STYLES: [&str; 4] = [
    "Conceptual Multiple Choice",
    "Conceptual Short Answer",
    "Code Understanding",
    "Data Analysis",
];

/// Fixed per-module sampling temperature and allowed model tiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulePolicy {
    pub module: ModuleKind,
    pub temperature: f64,
    pub allowed_tiers: &'static [Tier],
}

const ALL_TIERS: &[Tier] = &[Tier::Frontier, Tier::Light];
const FRONTIER_ONLY: &[Tier] = &[Tier::Frontier];

impl ModulePolicy {
    pub fn for_module(module: ModuleKind) -> Self {
        let (temperature, allowed_tiers) = match module {
            ModuleKind::Coding | ModuleKind::Project => (0.0, ALL_TIERS),
            ModuleKind::Exam | ModuleKind::Interview => (0.25, FRONTIER_ONLY),
        };
        ModulePolicy {
            module,
            temperature,
            allowed_tiers,
        }
    }

    pub fn allows(&self, tier: Tier) -> bool {
        self.allowed_tiers.contains(&tier)
    }
}
