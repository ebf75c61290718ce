//! Parsers for command-line values.

use crate::report::{usage, CliError};
use kcl_core::action::{FiniteSystem, GroupElement, PointSet, SystemDescriptor};
use kcl_core::rational::{parse_rational, parse_rational_list, Rational};
use kcl_core::renewal::RenewalDistribution;

/// Reads `arg` as inline JSON when it starts with `{`, otherwise as a path.
fn json_text(arg: &str) -> Result<String, CliError> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        std::fs::read_to_string(arg).map_err(|e| usage(format!("cannot read `{arg}`: {e}")))
    }
}

pub fn load_system(arg: &str) -> Result<FiniteSystem, CliError> {
    let text = json_text(arg)?;
    SystemDescriptor::from_json(&text).map_err(|e| usage(format!("system descriptor: {e}")))
}

/// Torus shortcut `a,b,...`.
pub fn torus_system(sizes: &str) -> Result<FiniteSystem, CliError> {
    let sizes = parse_usizes(sizes, "sizes")?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(usage("sizes must be positive"));
    }
    Ok(FiniteSystem::torus(&sizes))
}

pub fn parse_usizes(s: &str, what: &str) -> Result<Vec<usize>, CliError> {
    split(s)
        .map(|t| t.parse::<usize>().map_err(|_| usage(format!("{what}: `{t}` is not a nonnegative integer"))))
        .collect()
}

pub fn parse_u64s(s: &str, what: &str) -> Result<Vec<u64>, CliError> {
    split(s)
        .map(|t| t.parse::<u64>().map_err(|_| usage(format!("{what}: `{t}` is not a nonnegative integer"))))
        .collect()
}

pub fn parse_f64s(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    split(s)
        .map(|t| t.parse::<f64>().map_err(|_| usage(format!("{what}: `{t}` is not a number"))))
        .collect()
}

fn split(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

/// Point indices `i,j,...` into a universe of `n` points.
pub fn parse_set(s: &str, n: usize, what: &str) -> Result<PointSet, CliError> {
    let idx = parse_usizes(s, what)?;
    if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
        return Err(usage(format!("{what}: point {bad} out of range 0..{n}")));
    }
    Ok(PointSet::from_indices(n, &idx))
}

pub fn parse_rationals(s: &str, len: usize, what: &str) -> Result<Vec<Rational>, CliError> {
    let v = parse_rational_list(s).map_err(|e| usage(format!("{what}: {e}")))?;
    if v.len() != len {
        return Err(usage(format!("{what}: expected {len} entries, found {}", v.len())));
    }
    Ok(v)
}

pub fn parse_rat(s: &str, what: &str) -> Result<Rational, CliError> {
    parse_rational(s).map_err(|e| usage(format!("{what}: {e}")))
}

pub fn parse_element(s: &str, d: usize, what: &str) -> Result<GroupElement, CliError> {
    let c: Vec<i64> = split(s)
        .map(|t| t.parse::<i64>().map_err(|_| usage(format!("{what}: `{t}` is not an integer"))))
        .collect::<Result<_, _>>()?;
    if c.len() != d {
        return Err(usage(format!("{what}: expected {d} coordinates")));
    }
    Ok(GroupElement(c))
}

pub fn parse_pair(s: &str, what: &str) -> Result<(f64, f64), CliError> {
    match parse_f64s(s, what)?[..] {
        [x, y] => Ok((x, y)),
        _ => Err(usage(format!("{what}: expected `x,y`"))),
    }
}

/// `exp:RATE`, `uniform:A:B`, `lattice:K1,K2,...:P1,P2,...`, or JSON.
pub fn parse_distribution(s: &str) -> Result<RenewalDistribution, CliError> {
    let bad = |m: String| usage(format!("distribution: {m}"));
    let dist = if s.trim_start().starts_with('{') || s.ends_with(".json") {
        serde_json::from_str(&json_text(s)?).map_err(|e| bad(e.to_string()))?
    } else {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(format!("`{t}` is not a number")));
        match parts[..] {
            ["exp", rate] => RenewalDistribution::Exponential { rate: num(rate)? },
            ["uniform", a, b] => RenewalDistribution::UniformCont { a: num(a)?, b: num(b)? },
            ["lattice", support, probs] => RenewalDistribution::DiscreteLattice {
                support: parse_u64s(support, "support")?,
                probs: parse_rational_list(probs).map_err(|e| bad(e.to_string()))?,
            },
            _ => return Err(bad(format!("unrecognised `{s}`"))),
        }
    };
    dist.validate().map_err(|e| bad(e.to_string()))?;
    Ok(dist)
}

/// Seed of case `i` in a batch run.
pub fn case_seed(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i)
}
