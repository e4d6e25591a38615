use super::config::{CheckSpec, DiffusionConfig, McConfig, RunConfig, SequenceSpec};
use crate::analysis::{EqualityClaim, EventRule, LimitFamily};
use crate::backward::{Basis, GridConfig, LadderConfig, RegressionConfig};
use crate::convexlab::Axis;
use crate::forward::Affine;
use crate::ladder::{GeneratorKind, TerminalKind};

pub const SCENARIO_NAMES: &[&str] = &[
    "entropic-1d",
    "g-zero-linear",
    "g-zero-quadratic",
    "monotone-separable",
    "locality-brownian",
    "weighted-relu-z",
    "epi-limits",
];

fn base(name: &str, generator: GeneratorKind, terminal: TerminalKind) -> RunConfig {
    RunConfig {
        scenario: name.into(),
        seed: 0,
        generator,
        generator_flags: None,
        terminal,
        diffusion: DiffusionConfig::brownian(1.0),
        grid: GridConfig::default(),
        ladder: LadderConfig::default(),
        mc: McConfig::default(),
        checks: Vec::new(),
        out: None,
    }
}

fn hats_mc() -> McConfig {
    McConfig {
        steps: 100,
        regression: RegressionConfig {
            basis: Basis::Hats { knots: 30 },
            ..RegressionConfig::default()
        },
        ..McConfig::default()
    }
}

/// Registry configuration for `name`; the seed is a placeholder the caller must set.
pub fn scenario(name: &str) -> Option<RunConfig> {
    let c = match name {
        "entropic-1d" => RunConfig {
            ladder: LadderConfig { n_max: 16, tol: 1e-3 },
            mc: hats_mc(),
            checks: vec![
                CheckSpec::Markov {
                    t: 0.5,
                    equality: true,
                    buckets: 20,
                },
                CheckSpec::Shift {
                    t: 0.5,
                    x: 0.0,
                    level: 16,
                },
                CheckSpec::Viscosity {
                    tol: 1e-3,
                    kink_threshold: 0.1,
                },
                CheckSpec::Lsc { t: 0.5 },
                CheckSpec::Stability {
                    x: 0.0,
                    sequence: SequenceSpec::Harmonic { count: 1000, sign: 1.0 },
                    tol: 5e-3,
                    claim: Some(EqualityClaim::Continuous),
                    rec_known: false,
                    tail_from: None,
                },
            ],
            ..base(name, GeneratorKind::Entropic, TerminalKind::Tanh)
        },
        "g-zero-linear" | "g-zero-quadratic" => {
            let terminal = if name == "g-zero-linear" {
                TerminalKind::Identity
            } else {
                TerminalKind::Square
            };
            RunConfig {
                ladder: LadderConfig { n_max: 8, tol: 1e-3 },
                checks: vec![
                    CheckSpec::Markov {
                        t: 0.5,
                        equality: true,
                        buckets: 20,
                    },
                    CheckSpec::Viscosity {
                        tol: 1e-3,
                        kink_threshold: 0.1,
                    },
                    CheckSpec::Lsc { t: 0.5 },
                ],
                ..base(name, GeneratorKind::Zero, terminal)
            }
        }
        "monotone-separable" => RunConfig {
            checks: vec![CheckSpec::Stability {
                x: 0.0,
                sequence: SequenceSpec::Harmonic {
                    count: 4000,
                    sign: -1.0,
                },
                tol: 5e-3,
                claim: Some(EqualityClaim::Monotone),
                rec_known: false,
                tail_from: None,
            }],
            ..base(name, GeneratorKind::SeparableX2Z2, TerminalKind::PositivePart)
        },
        "locality-brownian" => RunConfig {
            checks: vec![CheckSpec::Locality {
                t: 0.5,
                event: EventRule::AboveStart,
                second: DiffusionConfig {
                    mu: Affine::constant(0.5),
                    ..DiffusionConfig::brownian(1.0)
                },
                level: 64,
            }],
            ..base(name, GeneratorKind::Zero, TerminalKind::Square)
        },
        "weighted-relu-z" => RunConfig {
            checks: vec![CheckSpec::Stability {
                x: 0.0,
                sequence: SequenceSpec::Harmonic { count: 64, sign: 1.0 },
                tol: 5e-3,
                claim: None,
                rec_known: false,
                tail_from: None,
            }],
            ..base(name, GeneratorKind::WeightedReluZ, TerminalKind::Tanh)
        },
        "epi-limits" => {
            let axis = Axis::new(-2.0, 2.0, 81).expect("static axis");
            RunConfig {
                checks: vec![
                    CheckSpec::Limits {
                        family: LimitFamily::Oscillating { count: 32 },
                        axis,
                    },
                    CheckSpec::Limits {
                        family: LimitFamily::ShiftedParabola { count: 32, tail: 2 },
                        axis: Axis::new(-1.0, 1.0, 41).expect("static axis"),
                    },
                    CheckSpec::Limits {
                        family: LimitFamily::ScaledParabola { count: 64, tail: 4 },
                        axis: Axis::new(-1.0, 1.0, 101).expect("static axis"),
                    },
                ],
                ..base(name, GeneratorKind::Zero, TerminalKind::Zero)
            }
        }
        _ => return None,
    };
    Some(c)
}
