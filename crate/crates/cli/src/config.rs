//! Run configuration: JSON files, built-in presets and the discretization
//! profile.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tdcr_core::scenario::ClosedLoopSetup;

use crate::error::CliError;

pub const PROFILE_VAR: &str = "COSSERAT_PROFILE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    /// Reserved; the pipeline is deterministic.
    #[serde(default)]
    pub seed: u64,
    pub simulation: ClosedLoopSetup,
}

const PRESETS: &[(&str, &str)] = &[
    (
        "nominal_backstepping",
        include_str!("../../../configs/nominal_backstepping.json"),
    ),
    (
        "nominal_smc",
        include_str!("../../../configs/nominal_smc.json"),
    ),
    (
        "weight20_backstepping",
        include_str!("../../../configs/weight20_backstepping.json"),
    ),
    (
        "weight20_smc",
        include_str!("../../../configs/weight20_smc.json"),
    ),
    (
        "weight50_backstepping",
        include_str!("../../../configs/weight50_backstepping.json"),
    ),
    (
        "weight50_smc",
        include_str!("../../../configs/weight50_smc.json"),
    ),
    (
        "disturbance_backstepping",
        include_str!("../../../configs/disturbance_backstepping.json"),
    ),
    (
        "disturbance_smc",
        include_str!("../../../configs/disturbance_smc.json"),
    ),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

/// Parses a config, reporting the key path of the first error.
pub fn parse(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Config(format!("{origin}: {inner}"))
        } else {
            CliError::Config(format!("{origin}: {path}: {inner}"))
        }
    })
}

/// Loads a config from a file path or, failing that, a preset name.
pub fn load(spec: &str) -> Result<RunConfig, CliError> {
    let path = Path::new(spec);
    if path.exists() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        return parse(&text, &path.display().to_string());
    }
    match PRESETS.iter().find(|(name, _)| *name == spec) {
        Some((name, text)) => parse(text, name),
        None => Err(CliError::Config(format!(
            "{spec} is neither a readable file nor a preset (presets: {})",
            preset_names().collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Applies the profile named by `profile`, if any, and the horizon override.
pub fn resolve(
    mut config: RunConfig,
    profile: Option<&str>,
    horizon: Option<usize>,
) -> Result<RunConfig, CliError> {
    match profile {
        None => {}
        Some("fast") => config.simulation.rod.nodes = 40,
        Some("paper") => config.simulation.rod.nodes = 200,
        Some(other) => {
            return Err(CliError::Config(format!(
                "{PROFILE_VAR} must be `fast` or `paper` (got `{other}`)"
            )))
        }
    }
    if let Some(h) = horizon {
        config.simulation.horizon = h;
    }
    let violations = config.simulation.violations();
    if !violations.is_empty() {
        return Err(CliError::Invalid(
            violations
                .into_iter()
                .map(|v| format!("simulation.{v}"))
                .collect(),
        ));
    }
    Ok(config)
}

/// Loads and resolves a config using the environment's profile.
pub fn load_resolved(spec: &str, horizon: Option<usize>) -> Result<RunConfig, CliError> {
    let profile = std::env::var(PROFILE_VAR).ok();
    resolve(
        load(spec)?,
        profile.as_deref().filter(|p| !p.is_empty()),
        horizon,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use tdcr_core::scenario::{Controller, ScenarioKind};

    #[test]
    fn every_preset_parses_and_validates() {
        for name in preset_names() {
            let config = load(name).unwrap();
            assert_eq!(config.name, name);
            resolve(config, None, None).unwrap();
        }
    }

    #[test]
    fn gains_default_when_omitted() {
        let text = r#"{"name": "x", "simulation": {"controller": {"kind": "backstepping"}, "scenario": {"kind": "nominal"}}}"#;
        let config = parse(text, "inline").unwrap();
        assert!(
            matches!(config.simulation.controller, Controller::Backstepping(g) if g.alpha1 == 1500.0)
        );
        assert_eq!(config.simulation.scenario.kind, ScenarioKind::Nominal);
        assert_eq!(config.simulation.horizon, 100);
    }

    #[test]
    fn missing_and_unknown_keys_are_named() {
        let missing = r#"{"name": "x", "simulation": {"controller": {"kind": "backstepping"}}}"#;
        let msg = parse(missing, "inline").unwrap_err().to_string();
        assert!(msg.contains("scenario"), "{msg}");
        let unknown = r#"{"name": "x", "simulation": {"controller": {"kind": "backstepping"}, "scenario": {"kind": "nominal"}, "rod": {"lenght": 0.5}}}"#;
        let msg = parse(unknown, "inline").unwrap_err().to_string();
        assert!(
            msg.contains("simulation.rod") && msg.contains("lenght"),
            "{msg}"
        );
        let gain = r#"{"name": "x", "simulation": {"controller": {"kind": "backstepping", "alpha3": 1}, "scenario": {"kind": "nominal"}}}"#;
        let msg = parse(gain, "inline").unwrap_err().to_string();
        assert!(msg.contains("alpha3"), "{msg}");
    }

    #[test]
    fn profiles_set_the_node_count() {
        let config = load("nominal_backstepping").unwrap();
        assert_eq!(
            resolve(config.clone(), Some("fast"), None)
                .unwrap()
                .simulation
                .rod
                .nodes,
            40
        );
        assert_eq!(
            resolve(config.clone(), Some("paper"), Some(7))
                .unwrap()
                .simulation
                .horizon,
            7
        );
        assert!(resolve(config, Some("turbo"), None).is_err());
    }

    #[test]
    fn violations_are_listed_with_paths() {
        let mut config = load("nominal_backstepping").unwrap();
        config.simulation.rod.radius = -1.0;
        config.simulation.dt = 0.0;
        let err = resolve(config, None, None).unwrap_err();
        let CliError::Invalid(list) = err else {
            panic!("{err:?}")
        };
        assert!(
            list.iter().any(|m| m.starts_with("simulation.rod.radius")),
            "{list:?}"
        );
        assert!(
            list.iter().any(|m| m.starts_with("simulation.dt")),
            "{list:?}"
        );
    }
}
