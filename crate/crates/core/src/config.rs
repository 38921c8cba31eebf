//! System parameters and their validation.
//!
//! A [`SystemConfig`] is a flat record of every scalar the simulation needs.
//! It is serialized as a flat JSON object; unknown keys are rejected so that
//! typos in config files or `key=value` overrides never pass silently.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Frame-error rule default: more than 8 wrong bits in a message is a lost frame.
pub const DEFAULT_FER_BIT_THRESHOLD: usize = 8;

fn default_fer_bit_threshold() -> usize {
    DEFAULT_FER_BIT_THRESHOLD
}

/// How each user's `T x d` precoding matrix is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrecoderKind {
    /// Orthonormalized complex Gaussian draw, `P^H P = I`.
    OrthonormalColumns,
    /// Complex Gaussian draw with every column scaled to unit norm.
    NormalizedGaussian,
}

impl PrecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            PrecoderKind::OrthonormalColumns => "OrthonormalColumns",
            PrecoderKind::NormalizedGaussian => "NormalizedGaussian",
        }
    }
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// All scalar parameters of one simulated operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Online users `N`.
    pub n_online: usize,
    /// Active users `N_a` per frame.
    pub n_active: usize,
    /// Base-station antennas `M`.
    pub n_antennas: usize,
    /// Frame length `T` in symbols.
    pub frame_len: usize,
    /// Maximum message length `d` in symbols.
    pub msg_len: usize,
    /// BOMP iteration count `K`.
    pub bomp_iters: usize,
    /// Per-symbol SNR in dB; `rho0 = 10^(es_n0_db / 10)`.
    pub es_n0_db: f64,
    pub precoder_kind: PrecoderKind,
    #[serde(default = "default_fer_bit_threshold")]
    pub fer_bit_threshold: usize,
    pub seed: u64,
    /// Optional per-user message lengths (one entry per online user, each `<= msg_len`).
    /// Shorter messages are zero-padded to `msg_len` before precoding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg_lens: Option<Vec<usize>>,
}

impl SystemConfig {
    /// Uplink SNR `rho0` as a linear ratio.
    pub fn rho0(&self) -> f64 {
        10f64.powf(self.es_n0_db / 10.0)
    }

    /// `floor(M T / d)`, the largest admissible BOMP iteration count.
    pub fn max_iterations(&self) -> usize {
        if self.msg_len == 0 {
            return 0;
        }
        self.n_antennas * self.frame_len / self.msg_len
    }

    /// Message length of user `n`, honouring `msg_lens` when present.
    pub fn user_msg_len(&self, n: usize) -> usize {
        self.msg_lens
            .as_ref()
            .and_then(|lens| lens.get(n).copied())
            .unwrap_or(self.msg_len)
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut violations = Vec::new();
        for (field, value) in [
            ("n_online", self.n_online),
            ("n_active", self.n_active),
            ("n_antennas", self.n_antennas),
            ("frame_len", self.frame_len),
            ("msg_len", self.msg_len),
            ("bomp_iters", self.bomp_iters),
        ] {
            if value == 0 {
                violations.push(Violation::ZeroCount { field });
            }
        }
        if self.msg_len >= self.frame_len {
            violations.push(Violation::MsgLenNotBelowFrameLen {
                msg_len: self.msg_len,
                frame_len: self.frame_len,
            });
        }
        if self.n_active > self.n_online {
            violations.push(Violation::ActiveExceedsOnline {
                n_active: self.n_active,
                n_online: self.n_online,
            });
        }
        if self.msg_len > 0 && self.bomp_iters > self.max_iterations() {
            violations.push(Violation::IterationsExceedCeiling {
                bomp_iters: self.bomp_iters,
                ceiling: self.max_iterations(),
            });
        }
        if !self.es_n0_db.is_finite() {
            violations.push(Violation::NonFiniteSnr(self.es_n0_db));
        }
        if let Some(lens) = &self.msg_lens {
            if lens.len() != self.n_online {
                violations.push(Violation::MsgLensCount {
                    got: lens.len(),
                    n_online: self.n_online,
                });
            }
            if let Some((user, &len)) = lens
                .iter()
                .enumerate()
                .find(|(_, &len)| len == 0 || len > self.msg_len)
            {
                violations.push(Violation::MsgLensEntry {
                    user,
                    len,
                    msg_len: self.msg_len,
                });
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations })
        }
    }

    /// Parses a flat JSON object and validates it.
    pub fn from_json_str(text: &str) -> Result<Self, LoadError> {
        let cfg: SystemConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key=value` overrides and re-validates.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, LoadError> {
        let mut value = serde_json::to_value(self).expect("config serializes");
        apply_overrides(&mut value, overrides)?;
        let cfg: SystemConfig = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One violated constraint, naming the offending values.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroCount { field: &'static str },
    MsgLenNotBelowFrameLen { msg_len: usize, frame_len: usize },
    ActiveExceedsOnline { n_active: usize, n_online: usize },
    IterationsExceedCeiling { bomp_iters: usize, ceiling: usize },
    NonFiniteSnr(f64),
    MsgLensCount { got: usize, n_online: usize },
    MsgLensEntry { user: usize, len: usize, msg_len: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroCount { field } => write!(f, "{field} must be at least 1"),
            Violation::MsgLenNotBelowFrameLen { msg_len, frame_len } => write!(
                f,
                "msg_len < frame_len violated (d < T): msg_len={msg_len}, frame_len={frame_len}"
            ),
            Violation::ActiveExceedsOnline { n_active, n_online } => write!(
                f,
                "n_active <= n_online violated: n_active={n_active}, n_online={n_online}"
            ),
            Violation::IterationsExceedCeiling { bomp_iters, ceiling } => write!(
                f,
                "K exceeds floor(MT/d)={ceiling}: bomp_iters={bomp_iters}"
            ),
            Violation::NonFiniteSnr(v) => write!(f, "es_n0_db must be finite, got {v}"),
            Violation::MsgLensCount { got, n_online } => write!(
                f,
                "msg_lens must have one entry per online user: got {got}, n_online={n_online}"
            ),
            Violation::MsgLensEntry { user, len, msg_len } => write!(
                f,
                "msg_lens[{user}]={len} must lie in 1..={msg_len}"
            ),
        }
    }
}

/// Every violated invariant of a [`SystemConfig`].
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "invalid configuration: {}", parts.join("; "))
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ConfigError),
    #[error("bad override `{0}`: expected key=value")]
    MalformedOverride(String),
    #[error("unknown override key `{0}`")]
    UnknownKey(String),
}

/// Sets dotted `key=value` pairs on a parsed JSON document.
///
/// Every path component must already exist, except optional top-level fields
/// that were omitted from the document (they are checked by the typed
/// deserializer afterwards). Values are parsed as JSON when possible and
/// taken as plain strings otherwise, so `precoder_kind=NormalizedGaussian`
/// works without quoting.
pub fn apply_overrides<S: AsRef<str>>(doc: &mut Value, overrides: &[S]) -> Result<(), LoadError> {
    for raw in overrides {
        let raw = raw.as_ref();
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| LoadError::MalformedOverride(raw.to_string()))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(LoadError::MalformedOverride(raw.to_string()));
        }
        let parsed: Value =
            serde_json::from_str(value.trim()).unwrap_or_else(|_| Value::String(value.trim().into()));
        let mut parts = key.split('.').peekable();
        let mut node = &mut *doc;
        while let Some(part) = parts.next() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| LoadError::UnknownKey(key.to_string()))?;
            if parts.peek().is_none() {
                if !obj.contains_key(part) && !OPTIONAL_FIELDS.contains(&part) {
                    return Err(LoadError::UnknownKey(key.to_string()));
                }
                obj.insert(part.to_string(), parsed);
                break;
            }
            node = obj
                .get_mut(part)
                .ok_or_else(|| LoadError::UnknownKey(key.to_string()))?;
        }
    }
    Ok(())
}

const OPTIONAL_FIELDS: &[&str] = &["fer_bit_threshold", "msg_lens"];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn fig1() -> SystemConfig {
        SystemConfig {
            n_online: 80,
            n_active: 24,
            n_antennas: 8,
            frame_len: 1000,
            msg_len: 200,
            bomp_iters: 35,
            es_n0_db: 10.0,
            precoder_kind: PrecoderKind::OrthonormalColumns,
            fer_bit_threshold: 8,
            seed: 1,
            msg_lens: None,
        }
    }

    #[test]
    fn fig1_parameters_are_valid() {
        assert!(fig1().validate().is_ok());
        assert_eq!(fig1().max_iterations(), 40);
    }

    #[test]
    fn msg_len_equal_to_frame_len_is_rejected() {
        let mut cfg = fig1();
        cfg.msg_len = cfg.frame_len;
        cfg.bomp_iters = 1;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("msg_len < frame_len violated"), "{err}");
    }

    #[test]
    fn too_many_iterations_names_the_ceiling() {
        let mut cfg = fig1();
        cfg.bomp_iters = 41;
        let err = cfg.validate().unwrap_err();
        assert_eq!(
            err.violations,
            vec![Violation::IterationsExceedCeiling { bomp_iters: 41, ceiling: 40 }]
        );
        assert!(err.to_string().contains("K exceeds floor(MT/d)=40"));
    }

    #[test]
    fn every_violation_is_listed() {
        let mut cfg = fig1();
        cfg.n_active = 81;
        cfg.n_antennas = 0;
        cfg.es_n0_db = f64::NAN;
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.violations.len(), 4, "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut json: Value = serde_json::to_value(fig1()).unwrap();
        json["n_antenas"] = Value::from(4);
        assert!(serde_json::from_value::<SystemConfig>(json).is_err());
        assert!(matches!(
            fig1().with_overrides(&["n_antenas=4"]),
            Err(LoadError::UnknownKey(_))
        ));
    }

    #[test]
    fn overrides_apply_and_revalidate() {
        let cfg = fig1().with_overrides(&["n_active=28", "precoder_kind=NormalizedGaussian"]).unwrap();
        assert_eq!(cfg.n_active, 28);
        assert_eq!(cfg.precoder_kind, PrecoderKind::NormalizedGaussian);
        assert!(matches!(
            fig1().with_overrides(&["bomp_iters=41"]),
            Err(LoadError::Invalid(_))
        ));
        assert!(matches!(fig1().with_overrides(&["n_active"]), Err(LoadError::MalformedOverride(_))));
    }

    #[test]
    fn dotted_overrides_reach_nested_objects() {
        let mut doc = serde_json::json!({ "base": serde_json::to_value(fig1()).unwrap(), "trials": 3 });
        apply_overrides(&mut doc, &["base.n_active=8", "trials=5"]).unwrap();
        assert_eq!(doc["base"]["n_active"], 8);
        assert_eq!(doc["trials"], 5);
        assert!(apply_overrides(&mut doc, &["base.nope=1"]).is_err());
    }

    #[test]
    fn fer_threshold_defaults_to_eight() {
        let mut json: Value = serde_json::to_value(fig1()).unwrap();
        json.as_object_mut().unwrap().remove("fer_bit_threshold");
        let cfg: SystemConfig = serde_json::from_value(json).unwrap();
        assert_eq!(cfg.fer_bit_threshold, 8);
    }

    #[test]
    fn rho0_is_linear_snr() {
        let mut cfg = fig1();
        cfg.es_n0_db = 10.0;
        assert!((cfg.rho0() - 10.0).abs() < 1e-12);
        cfg.es_n0_db = 0.0;
        assert_eq!(cfg.rho0(), 1.0);
    }

    fn arb_config() -> impl Strategy<Value = SystemConfig> {
        (
            1usize..200,
            1usize..64,
            2usize..2000,
            any::<u64>(),
            -30.0f64..60.0,
            any::<bool>(),
            0usize..20,
        )
            .prop_flat_map(|(n_online, m, t, seed, snr, ortho, thr)| {
                (1..=n_online, 1..t, Just((n_online, m, t, seed, snr, ortho, thr)))
            })
            .prop_flat_map(|(n_active, d, (n_online, m, t, seed, snr, ortho, thr))| {
                let ceiling = m * t / d;
                (1..=ceiling).prop_map(move |k| SystemConfig {
                    n_online,
                    n_active,
                    n_antennas: m,
                    frame_len: t,
                    msg_len: d,
                    bomp_iters: k,
                    es_n0_db: snr,
                    precoder_kind: if ortho {
                        PrecoderKind::OrthonormalColumns
                    } else {
                        PrecoderKind::NormalizedGaussian
                    },
                    fer_bit_threshold: thr,
                    seed,
                    msg_lens: None,
                })
            })
    }

    proptest! {
        #[test]
        fn json_round_trip_preserves_fields(cfg in arb_config()) {
            prop_assert!(cfg.validate().is_ok());
            let back = SystemConfig::from_json_str(&cfg.to_json_string()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
