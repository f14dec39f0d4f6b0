use super::DriverConfig;

/// Perceived leader: bumper-to-bumper gap and approach rate `v_ego − v_lead`.
#[derive(Debug, Clone, Copy)]
pub struct Leader {
    pub gap: f64,
    pub approach_rate: f64,
}

/// Desired dynamic gap `s* = s₀ + vT + vΔv / (2√(ab))`, floored at `s₀`.
pub fn desired_gap(cfg: &DriverConfig, v: f64, approach_rate: f64) -> f64 {
    let dynamic = v * cfg.desired_headway
        + v * approach_rate / (2.0 * (cfg.max_accel * cfg.comfortable_decel).sqrt());
    cfg.jam_distance + dynamic.max(0.0)
}

/// IDM+ acceleration before the braking cap:
/// `a · min(1 − (v/v_des)^δ, 1 − (s*/s)²)`; the free-road term alone without a leader.
pub fn idm_plus(cfg: &DriverConfig, v: f64, desired_speed: f64, leader: Option<Leader>) -> f64 {
    let free = 1.0 - (v / desired_speed).powf(cfg.accel_exponent);
    let interaction = match leader {
        Some(l) if l.gap > 0.0 => {
            let r = desired_gap(cfg, v, l.approach_rate) / l.gap;
            1.0 - r * r
        }
        Some(_) => f64::NEG_INFINITY,
        None => f64::INFINITY,
    };
    cfg.max_accel * free.min(interaction)
}

/// Smallest gap at which IDM+ is in equilibrium when both vehicles drive at
/// the ego's desired speed: there the free-road term vanishes, so every gap
/// `s ≥ s₀ + vT` gives zero acceleration, and `s₀ + vT` is the closest one.
pub fn equilibrium_gap(cfg: &DriverConfig, v: f64) -> f64 {
    desired_gap(cfg, v, 0.0)
}
