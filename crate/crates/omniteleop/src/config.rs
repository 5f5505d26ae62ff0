//! Scenario files (TOML).
//!
//! Every block except `[sim]` is optional. An omitted block takes the
//! reference defaults; a block that is present must spell out all of its
//! fields. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use omniteleop_core::contact::WallModel;
use omniteleop_core::experiments::{AxisWindow, DecouplingTrial, PushSlideScript, Window};
use omniteleop_core::geom::exp_so3;
use omniteleop_core::link::LinkModel;
use omniteleop_core::operator::Grip;
use omniteleop_core::policy::{Deadband, PolicyParams};
use omniteleop_core::station::{StationLimits, StationParams, StationState};
use omniteleop_core::vehicle::{critical_damping, VehicleParams, VehicleState};
use omniteleop_core::{Diag6, InitialState, SimParams, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub const DEFAULT_DECIMATION: u64 = 10;
pub const DEFAULT_SNAPSHOT_HZ: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub station: Option<StationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<VehicleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall: Option<WallSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grip: Option<Grip>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoupling: Option<DecouplingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub push_slide: Option<PushSlideSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<ServiceSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Physics step [s].
    pub dt: f64,
    /// Run length [s].
    pub duration: f64,
    pub seed: u64,
    /// Keep one log record every `decimation` ticks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimation: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSection {
    pub human_inertia: [f64; 6],
    pub human_damping: [f64; 6],
    pub admittance_inertia: [f64; 6],
    pub admittance_damping: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    /// [m]; `inf` disables the workspace boundary.
    pub workspace_radius: f64,
    /// [deg]
    pub max_angle_deg: f64,
    pub max_force: f64,
    pub max_torque: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub v_max: f64,
    pub omega_max: f64,
    pub recentering_stiffness: [f64; 6],
    /// `[translation m, rotation]`; `[0, 0]` disables the deadband.
    pub deadband: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    pub inertia: [f64; 6],
    pub stiffness: [f64; 6],
    /// Explicit damping; when absent the damping is `2ζ√(M K)` with `damping_ratio`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<[f64; 6]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_ratio: Option<f64>,
    pub tool_offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSection {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    pub stiffness: f64,
    pub damping: f64,
    pub friction: f64,
    pub stiction_velocity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub forward_delay: f64,
    pub return_delay: f64,
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub vehicle_position: [f64; 3],
    /// Rotation vector [rad].
    pub vehicle_rotation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    /// CSV wrench trace, relative to the scenario file.
    pub trace: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecouplingSection {
    pub schedule: Vec<AxisWindow>,
    pub profile: [f64; 6],
    pub press: f64,
    pub release: f64,
    pub repetitions: usize,
    pub tremor: f64,
    pub tremor_lever: f64,
    pub tremor_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PushSlideSection {
    pub approach: [f64; 2],
    pub approach_target: f64,
    pub push: [f64; 2],
    pub slide_up: [f64; 2],
    pub slide_down: [f64; 2],
    pub slide_target: f64,
    pub settle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSection {
    pub snapshot_hz: f64,
}

/// What drives the handle during a headless run.
#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Idle,
    Trace(PathBuf),
    Decoupling(DecouplingTrial),
    PushSlide(PushSlideScript),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Idle => "idle",
            Experiment::Trace(_) => "trace",
            Experiment::Decoupling(_) => "decoupling",
            Experiment::PushSlide(_) => "push_slide",
        }
    }
}

/// A fully resolved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: SimParams,
    pub initial: InitialState,
    pub duration: f64,
    pub decimation: u64,
    pub experiment: Experiment,
    pub snapshot_hz: f64,
}

impl Scenario {
    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, &name, base)
    }

    /// Parses and resolves a scenario; relative paths are taken from `base`.
    pub fn from_toml(text: &str, name: &str, base: &Path) -> AppResult<Self> {
        let file = parse(text)?;
        file.resolve(name, base)
    }

    /// Replaces the operator with a wrench trace.
    pub fn with_trace(mut self, path: PathBuf) -> AppResult<Self> {
        if !matches!(self.experiment, Experiment::Idle | Experiment::Trace(_)) {
            return Err(AppError::Config {
                path: "operator.trace".into(),
                msg: format!("a {} scenario cannot take a trace", self.experiment.kind()),
            });
        }
        self.experiment = Experiment::Trace(path);
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.params.seed = seed;
        self
    }

    pub fn with_duration(mut self, duration: f64) -> AppResult<Self> {
        self.duration = duration;
        match &mut self.experiment {
            Experiment::Decoupling(t) => t.duration = duration,
            Experiment::PushSlide(s) => s.duration = duration,
            _ => {}
        }
        self.validate()?;
        Ok(self)
    }

    pub fn with_decimation(mut self, decimation: u64) -> AppResult<Self> {
        self.decimation = decimation;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> AppResult<()> {
        let invalid = |path: &str, msg: &str| AppError::Config {
            path: path.into(),
            msg: msg.into(),
        };
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(invalid("sim.duration", "must be positive"));
        }
        if self.decimation == 0 {
            return Err(invalid("sim.decimation", "must be at least 1"));
        }
        if !(self.snapshot_hz > 0.0 && self.snapshot_hz.is_finite()) {
            return Err(invalid("service.snapshot_hz", "must be positive"));
        }
        self.params.validate().map_err(AppError::from_core_config)?;
        match &self.experiment {
            Experiment::Decoupling(t) => {
                t.validate().map_err(AppError::from_core_config)?;
                t.phases(&self.params).map_err(AppError::from_core_config)?;
                if self.params.wall.is_some() {
                    return Err(invalid("wall", "decoupling trials run in free flight"));
                }
            }
            Experiment::PushSlide(s) => {
                s.validate().map_err(AppError::from_core_config)?;
                if self.params.wall.is_none() {
                    return Err(invalid("wall", "push_slide needs a [wall] block"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn parse(text: &str) -> AppResult<ScenarioFile> {
    let de = toml::Deserializer::parse(text).map_err(|e| AppError::Config {
        path: String::new(),
        msg: e.to_string(),
    })?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        AppError::Config {
            path: if path == "." { String::new() } else { path },
            msg: e.into_inner().message().trim().to_string(),
        }
    })
}

fn diag(a: [f64; 6]) -> Diag6 {
    Diag6(a)
}

fn window(w: [f64; 2]) -> Window {
    Window::new(w[0], w[1])
}

impl ScenarioFile {
    fn resolve(&self, name: &str, base: &Path) -> AppResult<Scenario> {
        let mut params = SimParams {
            dt: self.sim.dt,
            seed: self.sim.seed,
            ..SimParams::default()
        };
        if let Some(s) = &self.station {
            params.station = StationParams {
                human_inertia: diag(s.human_inertia),
                human_damping: diag(s.human_damping),
                admittance_inertia: diag(s.admittance_inertia),
                admittance_damping: diag(s.admittance_damping),
            };
        }
        if let Some(l) = &self.limits {
            params.limits = StationLimits {
                workspace_radius: l.workspace_radius,
                max_angle: l.max_angle_deg.to_radians(),
                max_force: l.max_force,
                max_torque: l.max_torque,
            };
        }
        if let Some(v) = &self.vehicle {
            let inertia = diag(v.inertia);
            let stiffness = diag(v.stiffness);
            let damping = match (v.damping, v.damping_ratio) {
                (Some(_), Some(_)) => {
                    return Err(AppError::Config {
                        path: "vehicle".into(),
                        msg: "give either `damping` or `damping_ratio`, not both".into(),
                    })
                }
                (Some(d), None) => diag(d),
                (None, zeta) => critical_damping(&inertia, &stiffness, zeta.unwrap_or(1.0)),
            };
            params.vehicle = VehicleParams {
                inertia,
                damping,
                stiffness,
                tool_offset: Vec3::from(v.tool_offset),
            };
        }
        params.policy.tool_offset = params.vehicle.tool_offset;
        if let Some(p) = &self.policy {
            let [translation, rotation] = p.deadband;
            params.policy = PolicyParams {
                v_max: p.v_max,
                omega_max: p.omega_max,
                recentering_stiffness: diag(p.recentering_stiffness),
                deadband: (translation > 0.0 || rotation > 0.0).then_some(Deadband { translation, rotation }),
                ..params.policy
            };
        }
        params.wall = self.wall.as_ref().map(|w| WallModel {
            point: Vec3::from(w.point),
            normal: Vec3::from(w.normal),
            stiffness: w.stiffness,
            damping: w.damping,
            friction: w.friction,
            stiction_velocity: w.stiction_velocity,
        });
        if let Some(l) = &self.link {
            params.link = LinkModel {
                forward_delay: l.forward_delay,
                return_delay: l.return_delay,
                jitter: l.jitter,
            };
        }
        let initial = match &self.initial {
            Some(i) => InitialState {
                station: StationState::default(),
                vehicle: VehicleState::at(Vec3::from(i.vehicle_position), exp_so3(&Vec3::from(i.vehicle_rotation))),
            },
            None => InitialState::default(),
        };
        let grip = self.grip.unwrap_or_default();
        let duration = self.sim.duration;

        let declared = [
            self.operator.is_some(),
            self.decoupling.is_some(),
            self.push_slide.is_some(),
        ];
        if declared.iter().filter(|d| **d).count() > 1 {
            return Err(AppError::Config {
                path: String::new(),
                msg: "[operator], [decoupling] and [push_slide] are mutually exclusive".into(),
            });
        }
        let experiment = if let Some(op) = &self.operator {
            Experiment::Trace(base.join(&op.trace))
        } else if let Some(d) = &self.decoupling {
            Experiment::Decoupling(DecouplingTrial {
                duration,
                schedule: d.schedule.clone(),
                profile: d.profile,
                press: d.press,
                release: d.release,
                repetitions: d.repetitions,
                tremor: d.tremor,
                tremor_lever: d.tremor_lever,
                tremor_tau: d.tremor_tau,
                grip,
            })
        } else if let Some(s) = &self.push_slide {
            Experiment::PushSlide(PushSlideScript {
                duration,
                approach: window(s.approach),
                approach_target: s.approach_target,
                push: window(s.push),
                slide_up: window(s.slide_up),
                slide_down: window(s.slide_down),
                slide_target: s.slide_target,
                settle: s.settle,
                grip,
            })
        } else {
            Experiment::Idle
        };

        let scenario = Scenario {
            name: name.to_string(),
            params,
            initial,
            duration,
            decimation: self.sim.decimation.unwrap_or(DEFAULT_DECIMATION),
            experiment,
            snapshot_hz: self.service.as_ref().map_or(DEFAULT_SNAPSHOT_HZ, |s| s.snapshot_hz),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
