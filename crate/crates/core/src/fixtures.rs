//! Bundled example models and formulas.

/// Two-state model with a blind and a perfect observation.
pub const FIG2: &str = include_str!("../fixtures/fig2.km");
/// Seven-state branching model where switching to `o2` reveals `p`.
pub const FIG1: &str = include_str!("../fixtures/fig1.km");
/// Variant of [`FIG1`] where `o2` is too coarse to reveal `p`.
pub const FIG4: &str = include_str!("../fixtures/fig4.km");
/// Six-state sensor model for fault-tolerant diagnosability.
pub const DIAG: &str = include_str!("../fixtures/diag.km");
/// Diagnosability with both sensors, tolerating the loss of sensor 1.
pub const DIAG_FULL: &str = include_str!("../fixtures/diag_full.ctl");
/// The same property once sensor 2 has been removed from the configuration.
pub const DIAG_DEGRADED: &str = include_str!("../fixtures/diag_degraded.ctl");

/// `(file name, contents)` for each named bundle.
pub fn bundle(name: &str) -> Option<Vec<(&'static str, &'static str)>> {
    Some(match name {
        "fig1" => vec![("fig1.km", FIG1)],
        "fig2" => vec![("fig2.km", FIG2)],
        "fig4" => vec![("fig4.km", FIG4)],
        "diag" => vec![("diag.km", DIAG), ("diag_full.ctl", DIAG_FULL), ("diag_degraded.ctl", DIAG_DEGRADED)],
        _ => return None,
    })
}

pub const BUNDLES: &[&str] = &["fig1", "fig2", "fig4", "diag"];
