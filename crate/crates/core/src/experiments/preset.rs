use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Axis, AxisValue, Detector, ExperimentError, SweepSpec};
use crate::config::{PrecoderKind, SystemConfig, DEFAULT_FER_BIT_THRESHOLD};

/// Master seed shared by every preset.
pub const PRESET_SEED: u64 = 20_160_101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig1, Figure::Fig2, Figure::Fig3, Figure::Fig4];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| ExperimentError::UnknownFigure(s.to_string()))
    }
}

/// `Full` uses the full-size parameters; `Desk` divides `d` and `T` by 4,
/// keeping `T/d`, `MT/d` and `N_a/M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Full,
    #[default]
    Desk,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Full => "full",
            Scale::Desk => "desk",
        }
    }

    fn divisor(self) -> usize {
        match self {
            Scale::Full => 1,
            Scale::Desk => 4,
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scale {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            _ => Err(ExperimentError::UnknownScale(s.to_string())),
        }
    }
}

/// One curve of a figure: a label and the sweep that produces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub spec: SweepSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub figure: Figure,
    pub scale: Scale,
    pub curves: Vec<Curve>,
}

impl Preset {
    /// Configuration shared by the curves before per-curve changes.
    pub fn base(&self) -> &SystemConfig {
        &self.curves[0].spec.base
    }

    pub fn curve(&self, label: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.label == label)
    }
}

/// The 8-antenna, 80-user, `T = 5d` setting every figure starts from.
fn base(scale: Scale) -> SystemConfig {
    SystemConfig {
        n_online: 80,
        n_active: 24,
        n_antennas: 8,
        frame_len: 1000 / scale.divisor(),
        msg_len: 200 / scale.divisor(),
        bomp_iters: 35,
        es_n0_db: 0.0,
        precoder_kind: PrecoderKind::OrthonormalColumns,
        fer_bit_threshold: DEFAULT_FER_BIT_THRESHOLD,
        seed: PRESET_SEED,
        msg_lens: None,
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<AxisValue> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| AxisValue::Number(lo + step * k as f64)).collect()
}

fn trials(figure: Figure, scale: Scale) -> usize {
    match (figure, scale) {
        (_, Scale::Full) => 1000,
        (Figure::Fig1, Scale::Desk) => 500,
        (_, Scale::Desk) => 200,
    }
}

fn curve(label: String, cfg: SystemConfig, values: Vec<AxisValue>, n: usize, detector: Detector) -> Curve {
    Curve {
        label,
        spec: SweepSpec {
            base: cfg,
            axis: Axis::EsN0Db,
            values,
            trials_per_point: n,
            parallel_workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            detector,
            record_timing: false,
        },
    }
}

/// Sweeps behind each figure.
///
/// * fig1: `K` in {35, 30} against `N_a` in {8, 24, 28}, plus the genie
///   baseline at `K = 35` for `N_a` in {8, 24}
/// * fig2: `N` in {80, 160} at `N_a = 24`
/// * fig3: `M` in {8, 12} at `N_a/M = 3`, and `T` in {4d, 5d, 6d} at a fixed
///   `MT/(dK)`
/// * fig4: orthonormal against normalized Gaussian precoders
pub fn preset(figure: Figure, scale: Scale) -> Preset {
    let b = base(scale);
    let n = trials(figure, scale);
    let with = |f: &dyn Fn(&mut SystemConfig)| {
        let mut c = b.clone();
        f(&mut c);
        c
    };
    // desk grids are coarser: each desk trial still costs a 35-block
    // incremental factorization, and every curve brackets SER = 1e-2
    let desk = scale == Scale::Desk;
    let snr = |desk_grid: (f64, f64, f64), full_grid: (f64, f64, f64)| {
        let (lo, hi, step) = if desk { desk_grid } else { full_grid };
        grid(lo, hi, step)
    };
    let curves = match figure {
        Figure::Fig1 => {
            let mut curves = Vec::new();
            for (k, na) in [(35, 8), (35, 24), (35, 28), (30, 8), (30, 24)] {
                let cfg = with(&|c| {
                    c.bomp_iters = k;
                    c.n_active = na;
                });
                let values = if na == 28 {
                    snr((3.0, 24.0, 3.0), (-4.0, 30.0, 2.0))
                } else {
                    snr((3.0, 12.0, 3.0), (-4.0, 12.0, 2.0))
                };
                curves.push(curve(format!("bomp_k{k}_na{na}"), cfg, values, n, Detector::Bomp));
            }
            for na in [8, 24] {
                let cfg = with(&|c| c.n_active = na);
                let values = snr((3.0, 12.0, 3.0), (-4.0, 12.0, 2.0));
                curves.push(curve(format!("genie_k35_na{na}"), cfg, values, n, Detector::GenieLs));
            }
            curves
        }
        Figure::Fig2 => [80, 160]
            .into_iter()
            .map(|online| {
                let cfg = with(&|c| c.n_online = online);
                curve(format!("n{online}_na24"), cfg, snr((6.0, 14.0, 2.0), (-4.0, 14.0, 1.0)), n, Detector::Bomp)
            })
            .collect(),
        Figure::Fig3 => {
            let mut curves = Vec::new();
            for (m, na) in [(8, 24), (12, 36)] {
                let cfg = with(&|c| {
                    c.n_antennas = m;
                    c.n_active = na;
                });
                curves.push(curve(format!("m{m}_na{na}"), cfg, snr((2.0, 14.0, 3.0), (-6.0, 14.0, 2.0)), n, Detector::Bomp));
            }
            for (ratio, k) in [(4, 28), (5, 35), (6, 42)] {
                let cfg = with(&|c| {
                    c.frame_len = ratio * c.msg_len;
                    c.bomp_iters = k;
                });
                curves.push(curve(format!("t{ratio}d_k{k}"), cfg, snr((2.0, 14.0, 3.0), (-4.0, 14.0, 2.0)), n, Detector::Bomp));
            }
            curves
        }
        Figure::Fig4 => [PrecoderKind::OrthonormalColumns, PrecoderKind::NormalizedGaussian]
            .into_iter()
            .map(|kind| {
                let cfg = with(&|c| {
                    c.precoder_kind = kind;
                    c.n_active = 8;
                });
                curve(kind.name().to_string(), cfg, snr((4.0, 12.0, 2.0), (-4.0, 14.0, 1.0)), n, Detector::Bomp)
            })
            .collect(),
    };
    Preset { figure, scale, curves }
}
