//! Detection-side defences and their evaluation against an attack suite.

mod capacitive;
mod criteria;
mod limiter;
mod monitor;

pub use capacitive::{capacitive_response_vs_bias, CapacitivePoint};
pub use criteria::{
    evaluate_criteria, standard_attack_suite, AttackKind, AttackScenario, Criterion,
    CriteriaReport, CriteriaSettings, ScenarioOutcome, ToggleOutcome, Verdict,
};
pub use limiter::{power_limiter, DEFAULT_RESPONSE_TIME};
pub use monitor::{
    find_monitor_bypass, monitor_photocurrent, BypassScenario, MonitorVerdict,
    PhotocurrentMonitor,
};
