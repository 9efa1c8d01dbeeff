//! Unit extraction, canonicalization, validation and repair.

use std::sync::LazyLock;

use regex::Regex;

use crate::config::Engine;
use crate::label::Property;
use crate::numeric::{find_num, looks_numeric, median, normalize_text};

static LATEX_CMD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\\[a-zA-Z]+").unwrap());
static EXPONENT_PREFIX: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:[×x*]\s*)?10\s*\^?\s*\{?\s*\(?\s*[-+]?\s*\d+\s*\)?\s*\}?\s*").unwrap()
});
static KEY_EXPONENT_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:x|×)?10-?\d+").unwrap());
static UNCERTAINTY_UNIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:±|\+/-)\s*[\d.]+\s*(\S.*)$").unwrap());
static CAPTION_IN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bin\s+([^\s,;()]+(?:\s+[^\s,;()]+)?)").unwrap());
static UNIT_LIKE: LazyLock<Regex> = LazyLock::new(|| {
    let atom = r"(?:kgf|kg|gm|g|cm|mm|nm|µm|μm|m|gpa|mpa|kpa|pa|°c|°f|°|k|mev|ev|kj|j|mol|ohm|ω|ms|s|min|h|hv|hk|hb|hrb|hrc|hr|w|n|l|ml|cc|ppm|sqrt|deg|mohs)";
    Regex::new(&format!(
        r"(?i)^(?:1\s*/\s*)?(?:{atom}(?:\s*\^?\s*[-−]?\d+(?:/\d+|\.\d+)?)?[\s/·.\-*]*)+$"
    ))
    .unwrap()
});
static HARDNESS_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bhardness\b").unwrap());
static COMPOSITION_UNIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:mol|wt|at|mass|weight|mole)\s*\.?\s*%").unwrap());

/// Lookup key for a unit surface form: compatibility-normalized, lowercased,
/// with spacing, multiplication dots, braces, carets, brackets and non-decimal
/// periods removed.
pub fn unit_key(s: &str) -> String {
    let t = normalize_text(s).to_lowercase().replace('\u{2044}', "/");
    let t = LATEX_CMD.replace_all(&t, "");
    let t = t.replace('ω', "ohm");
    let chars: Vec<char> = t
        .chars()
        .filter(|c| {
            !c.is_whitespace() && !"·•⋅∙*${}^()[]_~\\".contains(*c)
        })
        .collect();
    let mut out = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        if c == '.' {
            let between = i > 0
                && chars[i - 1].is_ascii_digit()
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
            if !between {
                continue;
            }
        }
        out.push(c);
    }
    out
}

fn lookup(unit: &str, engine: &Engine) -> Option<String> {
    let key = unit_key(unit);
    if key.is_empty() {
        return None;
    }
    if let Some(c) = engine.compiled.surface.get(&key) {
        return Some(c.clone());
    }
    let stripped = KEY_EXPONENT_PREFIX.replace(&key, "");
    if stripped != key && !stripped.is_empty() {
        return engine.compiled.surface.get(stripped.as_ref()).cloned();
    }
    None
}

/// Canonical unit for `property`. `None` for empty input or a unitless
/// property, `Some("")` when the unit is not in that property's dictionary.
pub fn norm_unit(unit: &str, property: Property, engine: &Engine) -> Option<String> {
    if unit.trim().is_empty() {
        return None;
    }
    let rules = engine.cfg.rules(property);
    if rules.unitless {
        return None;
    }
    let canon = lookup(unit, engine).filter(|c| rules.units.contains(c) || rules.unit_aliases.contains(c));
    Some(canon.unwrap_or_default())
}

/// Whether `unit` is acceptable for `property`: absent, canonical, an accepted
/// alias, or anything that is not a recognized unit when the property is
/// unitless.
pub fn check_noncontrov_unit(unit: Option<&str>, property: Property, engine: &Engine) -> bool {
    let Some(unit) = unit.filter(|u| !u.trim().is_empty()) else {
        return true;
    };
    if engine.cfg.rules(property).unitless {
        return lookup(unit, engine).is_none();
    }
    norm_unit(unit, property, engine).is_some_and(|c| !c.is_empty())
}

fn strip_exponent(s: &str) -> String {
    EXPONENT_PREFIX.replace(s, "").trim().to_string()
}

/// Outermost bracketed groups of `text`.
fn bracket_groups(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in text.char_indices() {
        match c {
            '(' | '[' => {
                if depth == 0 {
                    start = i + c.len_utf8();
                }
                depth += 1;
            }
            ')' | ']' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    out.push(text[start..i].to_string());
                }
            }
            _ => {}
        }
    }
    out
}

/// Unit-bearing fragments of one header cell, most specific first.
pub fn unit_candidates(cell: &str) -> Vec<String> {
    let text = normalize_text(cell);
    let mut out: Vec<String> = bracket_groups(&text);
    if let Some(c) = UNCERTAINTY_UNIT.captures(&text) {
        out.push(c[1].to_string());
    }
    if let Some((_, after)) = text.split_once('/') {
        out.push(after.to_string());
    }
    if let Some((_, after)) = text.rsplit_once(',') {
        out.push(after.to_string());
    }
    let tokens: Vec<&str> = text.split_whitespace().collect();
    for n in (1..=3).rev() {
        for w in tokens.windows(n) {
            out.push(w.join(" "));
        }
    }
    out.push(text.clone());
    let mut seen = std::collections::HashSet::new();
    out.into_iter()
        .map(|c| strip_exponent(&c))
        .filter(|c| !c.is_empty() && seen.insert(c.clone()))
        .collect()
}

fn is_unit_like(s: &str) -> bool {
    s.chars().count() <= 16
        && s.chars().any(|c| c.is_alphabetic() || c == '°')
        && !COMPOSITION_UNIT.is_match(s)
        && UNIT_LIKE.is_match(s.trim())
}

#[derive(Debug, Default, Clone, PartialEq)]
struct Inferred {
    canonical: Option<String>,
    raw: Option<String>,
}

/// First index holding a number, falling back to `min(len/2, 3)`.
pub fn header_segment_end(line: &[&str]) -> usize {
    match line.iter().position(|c| looks_numeric(c)) {
        Some(k) if k > 0 => k,
        _ => (line.len() / 2).min(3).max(1).min(line.len()),
    }
}

/// Canonical unit for `property` found among the header-segment cells.
pub fn heading_unit(segment: &[&str], property: Property, engine: &Engine) -> Option<String> {
    segment.iter().flat_map(|c| unit_candidates(c)).find_map(|cand| {
        norm_unit(&cand, property, engine).filter(|c| !c.is_empty())
    })
}

fn infer_from_header_or_caption(
    segment: &[&str],
    property: Property,
    caption: &str,
    engine: &Engine,
) -> Inferred {
    let mut raw = None;
    for cell in segment {
        for cand in unit_candidates(cell) {
            match norm_unit(&cand, property, engine) {
                Some(c) if !c.is_empty() => {
                    return Inferred {
                        canonical: Some(c),
                        raw,
                    }
                }
                _ => {
                    if raw.is_none() && is_unit_like(&cand) && lookup(&cand, engine).is_some() {
                        raw = Some(cand);
                    }
                }
            }
        }
    }
    let cap = normalize_text(caption);
    let mut caption_cands: Vec<String> = bracket_groups(&cap);
    caption_cands.extend(CAPTION_IN.captures_iter(&cap).flat_map(|c| {
        let phrase = c[1].to_string();
        let first = phrase.split_whitespace().next().unwrap_or("").to_string();
        [phrase, first]
    }));
    for cand in caption_cands {
        if let Some(c) = norm_unit(&strip_exponent(&cand), property, engine).filter(|c| !c.is_empty()) {
            return Inferred {
                canonical: Some(c),
                raw,
            };
        }
    }
    Inferred {
        canonical: None,
        raw,
    }
}

fn default_from_median(property: Property, med: Option<f64>, engine: &Engine) -> String {
    let Some(m) = med else {
        return String::new();
    };
    engine
        .cfg
        .rules(property)
        .default_units
        .iter()
        .find(|d| d.min <= m && m <= d.max)
        .map(|d| d.unit.clone())
        .unwrap_or_default()
}

/// Complex regex recovery over the heading; the last match wins.
pub fn find_unit_further(property: Property, heading: &str, engine: &Engine) -> String {
    let text = normalize_text(heading);
    for re in &engine.compiled.unit_patterns[&property] {
        if let Some(m) = re.find_iter(&text).last() {
            let cleaned = m.as_str().trim_matches(|c: char| "()[] ".contains(c));
            if let Some(c) = norm_unit(cleaned, property, engine).filter(|c| !c.is_empty()) {
                return c;
            }
        }
    }
    String::new()
}

/// Median of the numeric cells of a line, header cell excluded.
pub fn line_median(line: &[&str]) -> Option<f64> {
    let vals: Vec<f64> = line
        .iter()
        .skip(1)
        .filter(|c| looks_numeric(c))
        .filter_map(|c| find_num(c).map(|n| n.value))
        .collect();
    median(&vals)
}

/// Unit for a property-labeled line (header cell first). `None` for unitless
/// properties, `Some("")` when nothing could be found.
pub fn set_units(line: &[&str], property: Property, caption: &str, engine: &Engine) -> Option<String> {
    if engine.cfg.rules(property).unitless {
        return None;
    }
    let end = header_segment_end(line);
    let segment = &line[..end];
    let heading = segment.join(" ");
    let med = line_median(line);

    let found = infer_from_header_or_caption(segment, property, caption, engine);
    let mut unit = found.canonical.unwrap_or_default();
    if unit.is_empty() {
        unit = find_unit_further(property, &heading, engine);
    }
    if unit.is_empty() {
        unit = found.raw.unwrap_or_default();
    }
    if unit.is_empty() {
        unit = default_from_median(property, med, engine);
    }
    if property == Property::Hardness || !check_noncontrov_unit(Some(&unit), property, engine) {
        unit = post_process_unit_extras(&unit, property, &heading, caption, med, engine);
    }
    Some(unit)
}

fn clean_unit_string(unit: &str) -> String {
    let t = normalize_text(unit);
    let t = LATEX_CMD.replace_all(&t, "");
    t.chars()
        .filter(|c| !"${}".contains(*c))
        .collect::<String>()
        .trim()
        .to_string()
}

/// Final refinement: cleanup, hardness-scale inference with value checks,
/// and canonicalization against the allowed set. An unrecognized unit is
/// returned unchanged.
pub fn post_process_unit_extras(
    unit: &str,
    property: Property,
    heading: &str,
    caption: &str,
    value: Option<f64>,
    engine: &Engine,
) -> String {
    let cleaned = clean_unit_string(unit);
    let mut variants: Vec<String> = Vec::new();
    if let Some(c) = norm_unit(&cleaned, property, engine).filter(|c| !c.is_empty()) {
        variants.push(c);
    } else if let Some(c) = lookup(&cleaned, engine) {
        variants.push(c);
    }
    let mut result = cleaned.clone();

    if property == Property::Hardness {
        let units = &engine.cfg.units;
        variants.retain(|v| !units.hardness_spurious.contains(v));
        let text = format!("{heading} \n {caption}");
        let scale = engine
            .compiled
            .hardness_scales
            .iter()
            .find(|(_, res)| res.iter().any(|r| r.is_match(&text)))
            .map(|(u, _)| u.clone());
        if let Some(s) = &scale {
            result = s.clone();
            if !variants.contains(s) {
                variants.push(s.clone());
            }
        }
        if let Some(v) = value {
            for var in &variants {
                if let Some(r) = units.hardness_ranges.get(var) {
                    if r[0] <= v && v <= r[1] {
                        return var.clone();
                    }
                }
            }
            let nano = units.nanoindentation_range;
            if scale.is_none() && HARDNESS_WORD.is_match(&text) && nano[0] <= v && v <= nano[1] {
                return "GPa".to_string();
            }
        }
    }

    let rules = engine.cfg.rules(property);
    if let Some(v) = variants.iter().find(|v| rules.units.contains(v) || rules.unit_aliases.contains(v)) {
        return v.clone();
    }
    result
}

/// Resistivity reported on a conductivity axis: invert the value and move to
/// the matching conductance unit.
pub fn reciprocal_repair(property: Property, unit: &str, value: f64) -> Option<(String, f64)> {
    if property != Property::ElectricalConductivity || value == 0.0 {
        return None;
    }
    let target = match unit {
        "ohm·cm" => "S/cm",
        "ohm·m" => "S/m",
        _ => return None,
    };
    Some((target.to_string(), 1.0 / value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eng() -> Engine {
        Engine::default()
    }

    #[test]
    fn keys() {
        assert_eq!(unit_key("g·cm−3"), "gcm-3");
        assert_eq!(unit_key("MPa·m^0.5"), "mpam0.5");
        assert_eq!(unit_key("deg. C"), "degc");
        assert_eq!(unit_key("(Ω cm)−1"), "ohmcm-1");
        assert_eq!(unit_key("g/cm³"), "g/cm3");
    }

    #[test]
    fn norm_unit_examples() {
        let e = eng();
        assert_eq!(norm_unit("MPa·m1/2", Property::FractureToughness, &e).as_deref(), Some("MPa·m^0.5"));
        assert_eq!(norm_unit("", Property::Density, &e), None);
        assert_eq!(norm_unit("bananas", Property::Density, &e).as_deref(), Some(""));
        assert_eq!(norm_unit("GPa", Property::Density, &e).as_deref(), Some(""));
        assert_eq!(norm_unit("1.49", Property::RefractiveIndex, &e), None);
    }

    #[test]
    fn check_examples() {
        let e = eng();
        assert!(check_noncontrov_unit(None, Property::SofteningPoint, &e));
        assert!(check_noncontrov_unit(Some("S/cm"), Property::ElectricalConductivity, &e));
        assert!(check_noncontrov_unit(Some("ohm·cm"), Property::ElectricalConductivity, &e));
        assert!(!check_noncontrov_unit(Some("GPa"), Property::AbbeValue, &e));
        assert!(!check_noncontrov_unit(Some("K"), Property::Density, &e));
    }

    #[test]
    fn set_units_examples() {
        let e = eng();
        let line = ["Density (g·cm−3)", "2.51", "2.60"];
        assert_eq!(set_units(&line, Property::Density, "", &e).as_deref(), Some("g/cm3"));
        let line = ["n", "1.51"];
        assert_eq!(set_units(&line, Property::RefractiveIndex, "", &e), None);
        let line = ["E", "71", "73"];
        assert_eq!(set_units(&line, Property::YoungsModulus, "Elastic data", &e).as_deref(), Some(""));
        let line = ["CTE (×10−6 /K)", "8.2"];
        assert_eq!(
            set_units(&line, Property::ThermalExpansionCoefficient, "", &e).as_deref(),
            Some("1/K")
        );
        let line = ["Tg", "500"];
        assert_eq!(
            set_units(&line, Property::GlassTransitionTemperature, "Thermal data (°C)", &e).as_deref(),
            Some("degC")
        );
    }

    #[test]
    fn hardness_scales() {
        let e = eng();
        let h = Property::Hardness;
        assert_eq!(post_process_unit_extras("", h, "H", "Vickers hardness of glasses", Some(550.0), &e), "HV");
        assert_eq!(post_process_unit_extras("", h, "H", "Hardness of glasses", Some(2.3), &e), "GPa");
        assert_eq!(post_process_unit_extras("", h, "H", "rockwell b scale", Some(80.0), &e), "HRB");
        assert_eq!(post_process_unit_extras("GPa", h, "H (GPa)", "", Some(12.0), &e), "GPa");
    }

    #[test]
    fn resistivity_repair() {
        let (u, v) = reciprocal_repair(Property::ElectricalConductivity, "ohm·cm", 1e5).unwrap();
        assert_eq!(u, "S/cm");
        assert!((v - 1e-5).abs() < 1e-18);
        assert!(reciprocal_repair(Property::Density, "ohm·cm", 2.0).is_none());
    }
}
