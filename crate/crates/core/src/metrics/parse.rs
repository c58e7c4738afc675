//! Metric spec text format.
//!
//! Sections in brackets, `key = value` pairs separated by newlines or `;`,
//! `#` comments. Example:
//!
//! ```text
//! [metric] kind=randers; a=conformal(4/(1+r2)^2); b=grad(0.2*x1*x2)
//! [region] rect = -0.5, -0.5, 0.5, 0.5
//! ```
//!
//! Sections: `[metric]` (kind and coefficient fields), `[atlas]` (chart atlas
//! and the antipodal flag), `[domain]` (support profile and basepoint for
//! Funk/Hilbert), `[region]` (planar quadrature rectangle). Unknown sections
//! and keys are rejected with the offending line number.

use std::collections::HashMap;

use super::domain::ConvexDomain;
use super::expr::parse_expr;
use super::fields::{MatrixField, OneFormSpec, ScalarField};
use super::{Atlas, Kind, Metric, Region};
use crate::error::{Error, Result};
use crate::norms::{SupportBody, TrigPoly, TAU};

const PROFILE_GRID: usize = 512;

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Split on `sep` at parenthesis depth zero.
fn split_top_level(s: &str, sep: char) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for c in s.chars() {
        match c {
            '(' => {
                depth += 1;
                current.push(c);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                current.push(c);
            }
            c if c == sep && depth == 0 => {
                parts.push(current.trim().to_string());
                current = String::new();
            }
            _ => current.push(c),
        }
    }
    parts.push(current.trim().to_string());
    parts
}

/// Parse `name(arg1, arg2, ...)`.
fn parse_call(value: &str, line: usize) -> Result<(String, Vec<String>)> {
    let open = value
        .find('(')
        .ok_or_else(|| err(line, format!("expected name(...), got '{value}'")))?;
    if !value.ends_with(')') {
        return Err(err(line, format!("unbalanced parentheses in '{value}'")));
    }
    let name = value[..open].trim().to_string();
    let inner = &value[open + 1..value.len() - 1];
    Ok((name, split_top_level(inner, ',')))
}

fn parse_matrix_field(value: &str, line: usize) -> Result<MatrixField> {
    let (name, args) = parse_call(value, line)?;
    let scalar = |src: &str| {
        ScalarField::parse(src).map_err(|e| err(line, format!("in '{value}': {e}")))
    };
    match (name.as_str(), args.len()) {
        ("conformal", 1) => Ok(MatrixField::Conformal(scalar(&args[0])?)),
        ("diag", 2) => Ok(MatrixField::Diag(scalar(&args[0])?, scalar(&args[1])?)),
        ("matrix", 3) => Ok(MatrixField::Full(
            scalar(&args[0])?,
            scalar(&args[1])?,
            scalar(&args[2])?,
        )),
        _ => Err(err(
            line,
            format!("metric tensor must be conformal(e), diag(e,e) or matrix(e,e,e), got '{value}'"),
        )),
    }
}

fn parse_one_form(value: &str, line: usize) -> Result<OneFormSpec> {
    let (name, args) = parse_call(value, line)?;
    let scalar = |src: &str| {
        ScalarField::parse(src).map_err(|e| err(line, format!("in '{value}': {e}")))
    };
    match (name.as_str(), args.len()) {
        ("grad", 1) => Ok(OneFormSpec::Grad(scalar(&args[0])?)),
        ("covector", 2) => Ok(OneFormSpec::Components(scalar(&args[0])?, scalar(&args[1])?)),
        _ => Err(err(
            line,
            format!("one-form must be grad(e) or covector(e,e), got '{value}'"),
        )),
    }
}

fn parse_floats(value: &str, count: usize, line: usize) -> Result<Vec<f64>> {
    let parts = split_top_level(value, ',');
    if parts.len() != count {
        return Err(err(
            line,
            format!("expected {count} comma-separated numbers, got '{value}'"),
        ));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| err(line, format!("bad number '{p}'")))
        })
        .collect()
}

/// Sample an angular profile expression and build its interpolant.
fn sample_profile(src: &str, line: usize) -> Result<(TrigPoly, Vec<f64>)> {
    let expr = parse_expr(src).map_err(|e| err(line, e.to_string()))?;
    if expr.uses_position() {
        return Err(err(
            line,
            format!("profile '{src}' may only use the angle variable t"),
        ));
    }
    let samples: Vec<f64> = (0..PROFILE_GRID)
        .map(|k| expr.eval(0.0, 0.0, TAU * k as f64 / PROFILE_GRID as f64))
        .collect();
    SupportBody::new(samples.clone())
        .map_err(|e| err(line, format!("profile '{src}' rejected: {e}")))?;
    Ok((TrigPoly::interpolate(&samples), samples))
}

struct Entry {
    line: usize,
    value: String,
    used: std::cell::Cell<bool>,
}

struct RawSpec {
    entries: HashMap<(String, String), Entry>,
}

impl RawSpec {
    fn get(&self, section: &str, key: &str) -> Option<(usize, &str)> {
        self.entries.get(&(section.into(), key.into())).map(|e| {
            e.used.set(true);
            (e.line, e.value.as_str())
        })
    }

    fn unused(&self) -> Option<(&(String, String), &Entry)> {
        self.entries
            .iter()
            .filter(|(_, e)| !e.used.get())
            .min_by_key(|(_, e)| e.line)
    }
}

const SECTION_KEYS: &[(&str, &[&str])] = &[
    ("metric", &["kind", "h", "a", "b", "beta", "base"]),
    ("atlas", &["kind", "antipodal"]),
    ("domain", &["support", "basepoint"]),
    ("region", &["rect"]),
];

fn scan(text: &str) -> Result<RawSpec> {
    let mut entries = HashMap::new();
    let mut section: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(cut) => &raw_line[..cut],
            None => raw_line,
        };
        let mut rest = line.trim();
        if rest.is_empty() {
            continue;
        }
        if rest.starts_with('[') {
            let close = rest
                .find(']')
                .ok_or_else(|| err(line_no, "unterminated section header"))?;
            let name = rest[1..close].trim().to_lowercase();
            if !SECTION_KEYS.iter().any(|(s, _)| *s == name) {
                return Err(err(line_no, format!("unknown section [{name}]")));
            }
            section = Some(name);
            rest = rest[close + 1..].trim();
            if rest.is_empty() {
                continue;
            }
        }
        let section_name = section
            .clone()
            .ok_or_else(|| err(line_no, "key outside of any [section]"))?;
        for clause in split_top_level(rest, ';') {
            if clause.is_empty() {
                continue;
            }
            let eq = clause
                .find('=')
                .ok_or_else(|| err(line_no, format!("expected key = value, got '{clause}'")))?;
            let key = clause[..eq].trim().to_lowercase();
            let value = clause[eq + 1..].trim().to_string();
            let allowed = SECTION_KEYS
                .iter()
                .find(|(s, _)| *s == section_name)
                .map(|(_, keys)| keys)
                .unwrap();
            if !allowed.contains(&key.as_str()) {
                return Err(err(
                    line_no,
                    format!("unknown key '{key}' in section [{section_name}]"),
                ));
            }
            if entries
                .insert(
                    (section_name.clone(), key.clone()),
                    Entry {
                        line: line_no,
                        value,
                        used: std::cell::Cell::new(false),
                    },
                )
                .is_some()
            {
                return Err(err(
                    line_no,
                    format!("duplicate key '{key}' in section [{section_name}]"),
                ));
            }
        }
    }
    Ok(RawSpec { entries })
}

fn kind_allows_sphere(kind: &Kind) -> bool {
    match kind {
        Kind::SphereRound | Kind::Riemannian { .. } | Kind::Randers { .. } => true,
        Kind::PlusOneForm { base, .. } => kind_allows_sphere(base),
        _ => false,
    }
}

/// Parse a metric spec file into a ready-to-evaluate `Metric`.
pub fn parse_spec(text: &str) -> Result<Metric> {
    let raw = scan(text)?;
    let (kind_line, kind_name) = raw
        .get("metric", "kind")
        .ok_or_else(|| err(1, "missing [metric] kind"))?;
    let kind_name = kind_name.to_lowercase();

    let domain = || -> Result<ConvexDomain> {
        let (line, src) = raw.get("domain", "support").ok_or_else(|| {
            err(kind_line, format!("kind {kind_name} requires [domain] support"))
        })?;
        let expr = parse_expr(src).map_err(|e| err(line, e.to_string()))?;
        if expr.uses_position() {
            return Err(err(line, "domain support may only use the angle variable t"));
        }
        let basepoint = match raw.get("domain", "basepoint") {
            Some((bp_line, bp)) => {
                let coords = parse_floats(bp, 2, bp_line)?;
                [coords[0], coords[1]]
            }
            None => [0.0, 0.0],
        };
        ConvexDomain::from_profile(&expr, src, PROFILE_GRID, basepoint)
            .map_err(|e| err(line, e.to_string()))
    };

    let matrix = |key: &str| -> Result<MatrixField> {
        let (line, src) = raw.get("metric", key).ok_or_else(|| {
            err(kind_line, format!("kind {kind_name} requires key '{key}'"))
        })?;
        parse_matrix_field(src, line)
    };
    let one_form = |key: &str| -> Result<OneFormSpec> {
        let (line, src) = raw.get("metric", key).ok_or_else(|| {
            err(kind_line, format!("kind {kind_name} requires key '{key}'"))
        })?;
        parse_one_form(src, line)
    };

    let kind = match kind_name.as_str() {
        "euclidean" => Kind::Euclidean,
        "sphere_round" => Kind::SphereRound,
        "minkowski" => {
            let (line, src) = raw
                .get("metric", "h")
                .ok_or_else(|| err(kind_line, "kind minkowski requires key 'h'"))?;
            let (support, _) = sample_profile(src, line)?;
            let polar = support.polar(2 * PROFILE_GRID);
            Kind::Minkowski {
                support,
                polar,
                profile_src: src.to_string(),
            }
        }
        "riemannian" => Kind::Riemannian { a: matrix("a")? },
        "randers" => Kind::Randers {
            a: matrix("a")?,
            b: one_form("b")?,
        },
        "funk" => Kind::Funk { domain: domain()? },
        "hilbert" => Kind::Hilbert { domain: domain()? },
        "plus_one_form" => {
            let (base_line, base_name) = raw
                .get("metric", "base")
                .ok_or_else(|| err(kind_line, "kind plus_one_form requires key 'base'"))?;
            let base = match base_name.to_lowercase().as_str() {
                "euclidean" => Kind::Euclidean,
                "sphere_round" => Kind::SphereRound,
                "riemannian" => Kind::Riemannian { a: matrix("a")? },
                other => {
                    return Err(err(
                        base_line,
                        format!("base must be euclidean, sphere_round or riemannian, got '{other}'"),
                    ))
                }
            };
            Kind::PlusOneForm {
                base: Box::new(base),
                beta: one_form("beta")?,
            }
        }
        other => return Err(err(kind_line, format!("unknown metric kind '{other}'"))),
    };

    let atlas = match raw.get("atlas", "kind") {
        Some((line, value)) => match value.to_lowercase().as_str() {
            "plane" => Atlas::Plane,
            "sphere_two_charts" => Atlas::SphereTwoCharts,
            other => return Err(err(line, format!("unknown atlas '{other}'"))),
        },
        None => {
            if kind_allows_sphere(&kind) && matches!(kind, Kind::SphereRound)
                || matches!(&kind, Kind::PlusOneForm { base, .. } if matches!(**base, Kind::SphereRound))
            {
                Atlas::SphereTwoCharts
            } else {
                Atlas::Plane
            }
        }
    };
    if atlas == Atlas::SphereTwoCharts && !kind_allows_sphere(&kind) {
        return Err(err(
            kind_line,
            format!("kind {kind_name} cannot live on the sphere atlas"),
        ));
    }

    let antipodal = match raw.get("atlas", "antipodal") {
        Some((line, value)) => match value.to_lowercase().as_str() {
            "true" => true,
            "false" => false,
            other => return Err(err(line, format!("antipodal must be true or false, got '{other}'"))),
        },
        None => false,
    };

    let region = match raw.get("region", "rect") {
        Some((line, value)) => {
            if atlas == Atlas::SphereTwoCharts {
                return Err(err(
                    line,
                    "region rect is not supported on the sphere atlas (the region is the whole sphere)",
                ));
            }
            let coords = parse_floats(value, 4, line)?;
            if !(coords[0] < coords[2] && coords[1] < coords[3]) {
                return Err(err(line, "region rect must satisfy lo < hi per axis"));
            }
            Region::Rect {
                lo: [coords[0], coords[1]],
                hi: [coords[2], coords[3]],
            }
        }
        None => match atlas {
            Atlas::SphereTwoCharts => Region::Sphere,
            Atlas::Plane => {
                if kind.domain().is_some() {
                    Region::Rect {
                        lo: [-0.6, -0.6],
                        hi: [0.6, 0.6],
                    }
                } else {
                    Region::unit_square()
                }
            }
        },
    };

    if let Some(((section, key), entry)) = raw.unused() {
        return Err(err(
            entry.line,
            format!("key '{key}' in section [{section}] is not used by kind {kind_name}"),
        ));
    }

    Ok(Metric::from_kind(kind, atlas, antipodal, region))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ChartPoint;
    use crate::norms::FiberVector;

    #[test]
    fn parses_the_documented_example() {
        let text = "[metric] kind=randers; a=conformal(4/(1+r2)^2); b=grad(0.2*x1*x2)";
        let metric = parse_spec(text).unwrap();
        assert_eq!(metric.atlas(), Atlas::Plane);
        let x = ChartPoint::plane(0.0, 0.0);
        let f = metric.eval(&x, FiberVector::new(1.0, 0.0)).unwrap();
        // a = 4 at the origin, b = (0, 0): F = 2.
        assert!((f - 2.0).abs() < 1e-9);
    }

    #[test]
    fn parses_sphere_plus_one_form() {
        let text = "\
[metric]
kind = plus_one_form
base = sphere_round
beta = grad(0.2*x1/(1+r2))
";
        let metric = parse_spec(text).unwrap();
        assert_eq!(metric.atlas(), Atlas::SphereTwoCharts);
        assert_eq!(metric.region(), Region::Sphere);
    }

    #[test]
    fn rejects_unknown_keys_with_line_numbers() {
        let text = "[metric]\nkind = euclidean\ncolor = red\n";
        match parse_spec(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("color"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_kind_and_misplaced_keys() {
        match parse_spec("[metric]\nkind = hyperbolic\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        // 'h' belongs to minkowski only.
        match parse_spec("[metric]\nkind = euclidean\nh = 1 + 0.1*cos(3*t)\n") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("not used"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parses_funk_with_domain() {
        let text = "\
[metric]
kind = funk

[domain]
support = 1
basepoint = 0.1, 0.0
";
        let metric = parse_spec(text).unwrap();
        assert!(metric.domain().is_some());
        let f = metric
            .eval(&ChartPoint::plane(0.5, 0.0), FiberVector::new(1.0, 0.0))
            .unwrap();
        assert!((f - 2.0).abs() < 1e-11);
    }

    #[test]
    fn minkowski_profile_and_region() {
        let text = "\
[metric] kind = minkowski; h = 1 + 0.1*cos(3*t)
[region] rect = 0, 0, 1, 1
";
        let metric = parse_spec(text).unwrap();
        let f = metric
            .eval(&ChartPoint::plane(0.3, 0.3), FiberVector::new(1.0, 0.0))
            .unwrap();
        assert!((f - 1.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_sphere_atlas_for_planar_kinds() {
        let text = "[metric] kind = euclidean\n[atlas] kind = sphere_two_charts\n";
        assert!(parse_spec(text).is_err());
    }
}
