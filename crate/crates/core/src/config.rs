//! Runtime configuration: property dictionaries, unit lexicon, post-processing
//! rules, thresholds and friend sets. A default document ships embedded.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Property;
use crate::units::unit_key;

pub const DEFAULT_CONFIG_TOML: &str = include_str!("default_config.toml");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub annotation: AnnotationSettings,
    pub supervision: SupervisionSettings,
    pub augmentation: AugmentationSettings,
    pub composition: CompositionSettings,
    pub units: UnitSettings,
    pub postprocess: PostprocessSettings,
    pub properties: BTreeMap<Property, PropertyRules>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationSettings {
    pub default_threshold: u32,
    pub min_first_line_numbers: usize,
    pub gid_keywords: Vec<String>,
    pub gid_min_uniqueness: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupervisionSettings {
    pub default_rel_tol: f64,
    pub composition_abs_tol: f64,
    pub min_density: f64,
    #[serde(default)]
    pub rel_tol: BTreeMap<Property, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationSettings {
    pub a: f64,
    pub alpha: f64,
    pub zero_sigma: f64,
    pub max_resample: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionSettings {
    pub min_median: f64,
    pub exclusion_tokens: Vec<String>,
    pub sum_windows: Vec<[f64; 2]>,
    pub compounds: Vec<CompoundEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompoundEntry {
    pub formula: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardnessScale {
    pub unit: String,
    pub patterns: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSettings {
    /// canonical spelling -> surface forms
    pub surface: BTreeMap<String, Vec<String>>,
    pub hardness_scales: Vec<HardnessScale>,
    pub hardness_ranges: BTreeMap<String, [f64; 2]>,
    /// value window for the caption-only "hardness" fallback to GPa
    pub nanoindentation_range: [f64; 2],
    pub hardness_spurious: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextRule {
    pub property: Property,
    #[serde(default)]
    pub unit_in: Vec<String>,
    #[serde(default)]
    pub header_regex: Option<String>,
    #[serde(default)]
    pub caption_any: Vec<String>,
    #[serde(default)]
    pub caption_none: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternRule {
    pub property: Property,
    pub patterns: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeRule {
    pub property: Property,
    #[serde(default)]
    pub unit: Option<String>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvalidUnit {
    pub property: Property,
    pub unit: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostprocessSettings {
    pub composition_units: Vec<String>,
    pub pattern_map: Vec<PatternRule>,
    pub context_map: Vec<ContextRule>,
    pub value_fix: Vec<PatternRule>,
    pub value_fix_min_median: f64,
    pub ranges: Vec<RangeRule>,
    pub invalid_units: Vec<InvalidUnit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultUnit {
    pub min: f64,
    pub max: f64,
    pub unit: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyRules {
    pub phrases: Vec<String>,
    #[serde(default)]
    pub symbols: Vec<String>,
    #[serde(default)]
    pub caption_keywords: Vec<String>,
    #[serde(default)]
    pub disqualify: Vec<String>,
    pub range: [f64; 2],
    #[serde(default)]
    pub threshold: Option<u32>,
    #[serde(default)]
    pub median_range: Option<[f64; 2]>,
    #[serde(default)]
    pub unitless: bool,
    #[serde(default)]
    pub units: Vec<String>,
    #[serde(default)]
    pub unit_aliases: Vec<String>,
    #[serde(default)]
    pub unit_patterns: Vec<String>,
    #[serde(default)]
    pub default_units: Vec<DefaultUnit>,
    #[serde(default)]
    pub friends: Vec<Property>,
    #[serde(default)]
    pub ambiguous: Vec<String>,
    #[serde(default)]
    pub overloads: Vec<String>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        Config::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn rules(&self, p: Property) -> &PropertyRules {
        &self.properties[&p]
    }

    pub fn threshold(&self, p: Property) -> u32 {
        self.rules(p).threshold.unwrap_or(self.annotation.default_threshold)
    }

    pub fn rel_tol(&self, p: Property) -> f64 {
        self.supervision.rel_tol.get(&p).copied().unwrap_or(self.supervision.default_rel_tol)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.version != 1 {
            return bad(format!("unsupported config version {}", self.version));
        }
        for p in Property::ALL {
            let Some(r) = self.properties.get(&p) else {
                return bad(format!("missing rules for property {p}"));
            };
            if r.range[0] >= r.range[1] {
                return bad(format!("{p}: range min must be below max"));
            }
            if let Some(m) = r.median_range {
                if m[0] >= m[1] {
                    return bad(format!("{p}: median_range min must be below max"));
                }
            }
            if r.threshold == Some(0) {
                return bad(format!("{p}: threshold must be at least 1"));
            }
            if r.phrases.is_empty() {
                return bad(format!("{p}: at least one canonical phrase is required"));
            }
            for u in r.units.iter().chain(&r.unit_aliases) {
                if !self.units.surface.contains_key(u) {
                    return bad(format!("{p}: unit {u} is not a canonical unit"));
                }
            }
            for d in &r.default_units {
                if !r.units.contains(&d.unit) {
                    return bad(format!("{p}: default unit {} is not allowed", d.unit));
                }
            }
        }
        if self.annotation.default_threshold == 0 {
            return bad("default_threshold must be at least 1".into());
        }
        for rule in &self.postprocess.ranges {
            if rule.min >= rule.max {
                return bad(format!("{}: range min must be below max", rule.property));
            }
        }
        for rule in &self.postprocess.value_fix {
            for pat in &rule.patterns {
                let re = compile(pat)?;
                if re.captures_len() < 2 {
                    return bad(format!("value_fix pattern `{pat}` must capture the exponent"));
                }
            }
        }
        for rule in &self.postprocess.context_map {
            if rule.unit_in.is_empty() && rule.header_regex.is_none() {
                return bad(format!(
                    "context rule for {} needs a unit or header condition",
                    rule.property
                ));
            }
        }
        for (u, r) in &self.units.hardness_ranges {
            if r[0] >= r[1] {
                return bad(format!("hardness range for {u} is empty"));
            }
        }
        if !(0.0..=1.0).contains(&self.supervision.min_density) {
            return bad("min_density must lie in [0, 1]".into());
        }
        // surfaces must map unambiguously
        let mut seen: HashMap<String, &str> = HashMap::new();
        for (canon, forms) in &self.units.surface {
            for f in std::iter::once(canon).chain(forms) {
                let k = unit_key(f);
                if let Some(prev) = seen.insert(k.clone(), canon) {
                    if prev != canon {
                        return bad(format!("unit surface `{f}` maps to both {prev} and {canon}"));
                    }
                }
            }
        }
        Compiled::new(self).map(|_| ())
    }
}

impl Default for Config {
    fn default() -> Self {
        Config::from_toml(DEFAULT_CONFIG_TOML).expect("embedded default config is valid")
    }
}

pub(crate) fn compile(pat: &str) -> Result<Regex> {
    Regex::new(pat).map_err(|e| Error::Config(format!("bad regex `{pat}`: {e}")))
}

fn word_regex(words: &[String]) -> Result<Option<Regex>> {
    if words.is_empty() {
        return Ok(None);
    }
    let alt = words
        .iter()
        .map(|w| regex::escape(&w.to_lowercase()))
        .collect::<Vec<_>>()
        .join("|");
    compile(&format!(r"(?i)(?:^|[^\p{{L}}\p{{N}}])(?:{alt})(?:$|[^\p{{L}}\p{{N}}])")).map(Some)
}

/// Regexes and lookup tables derived from a [`Config`].
#[derive(Debug, Clone)]
pub struct Compiled {
    pub surface: HashMap<String, String>,
    pub hardness_scales: Vec<(String, Vec<Regex>)>,
    pub unit_patterns: BTreeMap<Property, Vec<Regex>>,
    pub pattern_map: Vec<(Property, Vec<Regex>)>,
    pub context_headers: Vec<Option<Regex>>,
    pub value_fix: Vec<(Property, Vec<Regex>)>,
    pub gid_keywords: Option<Regex>,
}

impl Compiled {
    pub fn new(cfg: &Config) -> Result<Compiled> {
        let mut surface = HashMap::new();
        for (canon, forms) in &cfg.units.surface {
            for f in std::iter::once(canon).chain(forms) {
                surface.insert(unit_key(f), canon.clone());
            }
        }
        let compile_all = |v: &[String]| v.iter().map(|p| compile(p)).collect::<Result<Vec<_>>>();
        let hardness_scales = cfg
            .units
            .hardness_scales
            .iter()
            .map(|s| Ok((s.unit.clone(), compile_all(&s.patterns)?)))
            .collect::<Result<Vec<_>>>()?;
        let unit_patterns = cfg
            .properties
            .iter()
            .map(|(p, r)| Ok((*p, compile_all(&r.unit_patterns)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let pattern_map = cfg
            .postprocess
            .pattern_map
            .iter()
            .map(|r| Ok((r.property, compile_all(&r.patterns)?)))
            .collect::<Result<Vec<_>>>()?;
        let context_headers = cfg
            .postprocess
            .context_map
            .iter()
            .map(|r| r.header_regex.as_deref().map(compile).transpose())
            .collect::<Result<Vec<_>>>()?;
        let value_fix = cfg
            .postprocess
            .value_fix
            .iter()
            .map(|r| Ok((r.property, compile_all(&r.patterns)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Compiled {
            surface,
            hardness_scales,
            unit_patterns,
            pattern_map,
            context_headers,
            value_fix,
            gid_keywords: word_regex(&cfg.annotation.gid_keywords)?,
        })
    }
}

/// A validated config together with its compiled form.
#[derive(Debug, Clone)]
pub struct Engine {
    pub cfg: Config,
    pub compiled: Compiled,
}

impl Engine {
    pub fn new(cfg: Config) -> Result<Engine> {
        let compiled = Compiled::new(&cfg)?;
        Ok(Engine { cfg, compiled })
    }
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new(Config::default()).expect("embedded default config compiles")
    }
}

/// Case-insensitive containment of any token in `text`.
pub(crate) fn contains_any(text: &str, tokens: &[String]) -> bool {
    let lower = text.to_lowercase();
    tokens.iter().any(|t| !t.is_empty() && lower.contains(&t.to_lowercase()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = Config::default();
        assert_eq!(cfg.properties.len(), 18);
        assert_eq!(cfg.threshold(Property::Density), 2);
        assert_eq!(cfg.augmentation.a, 10.0);
        assert_eq!(cfg.augmentation.alpha, 0.65);
        assert!(cfg.rules(Property::AbbeValue).friends.contains(&Property::RefractiveIndex));
        assert!(cfg.rules(Property::FractureToughness).friends.contains(&Property::YoungsModulus));
    }

    #[test]
    fn every_allowed_unit_has_a_canonical_entry() {
        let cfg = Config::default();
        for p in Property::ALL {
            let r = cfg.rules(p);
            assert_eq!(r.unitless, r.units.is_empty(), "{p}");
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = Config::default();
        cfg.properties.get_mut(&Property::Density).unwrap().range = [5.0, 1.0];
        let text = toml::to_string(&cfg).unwrap();
        assert!(matches!(Config::from_toml(&text), Err(Error::Config(_))));

        let mut cfg = Config::default();
        cfg.postprocess.value_fix[0].patterns = vec![r"10\^-\d+".into()];
        let text = toml::to_string(&cfg).unwrap();
        assert!(Config::from_toml(&text).is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = Config::default();
        let text = toml::to_string(&cfg).unwrap();
        let back = Config::from_toml(&text).unwrap();
        assert_eq!(toml::to_string(&back).unwrap(), text);
    }
}
