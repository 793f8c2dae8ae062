//! The tight lower-bound family.
//!
//! `n` players share a direct resource `e`; each player also owns a private
//! path of `n^M` resources, and `e` is the first resource of player 0's path.
//! With everyone on `e` the bottleneck is `n`, and every player is exactly
//! indifferent (player 0 strictly prefers `e`). With everyone on their path
//! the bottleneck is 1. Hence the price of anarchy is `n = |R|^(1/(M+1))`.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::equilibria::{self, price_of_anarchy};
use crate::error::{Error, Result};
use crate::expansion::upper_bound_arbitrary;
use crate::game::{Game, Profile, ResourceId};

/// Largest `n^(M+1)` accepted by [`generate`].
pub const DEFAULT_RESOURCE_CAP: u64 = 1_000_000;

/// Strategy index of the direct resource.
pub const DIRECT: usize = 0;
/// Strategy index of the private path.
pub const PATH: usize = 1;

#[derive(Clone, Debug)]
pub struct LowerBoundInstance {
    pub n: usize,
    pub degree: u32,
    pub path_len: usize,
    pub num_resources: usize,
    pub game: Game,
    /// Everyone on the direct resource.
    pub state_s: Profile,
    /// Everyone on their own path.
    pub state_s_star: Profile,
}

/// The shared direct resource.
pub const SHARED_EDGE: ResourceId = 0;

pub fn generate(n: usize, degree: u32) -> Result<LowerBoundInstance> {
    generate_with_cap(n, degree, DEFAULT_RESOURCE_CAP)
}

pub fn generate_with_cap(n: usize, degree: u32, cap: u64) -> Result<LowerBoundInstance> {
    if n < 2 {
        return Err(Error::InvalidGame(format!("n must be at least 2, got {n}")));
    }
    if degree < 1 {
        return Err(Error::InvalidGame(format!(
            "degree must be at least 1, got {degree}"
        )));
    }
    let too_many = |requested| Error::TooManyResources { requested, cap };
    let requested = (n as u128).checked_pow(degree + 1).ok_or(too_many(u128::MAX))?;
    if requested > u128::from(cap) {
        return Err(too_many(requested));
    }
    let num_resources = requested as usize;
    let path_len = num_resources / n;
    let players = (0..n)
        .map(|i| {
            let path: Vec<ResourceId> = (i * path_len..(i + 1) * path_len).collect();
            vec![vec![SHARED_EDGE], path]
        })
        .collect();
    Ok(LowerBoundInstance {
        n,
        degree,
        path_len,
        num_resources,
        game: Game::new(num_resources, degree, players)?,
        state_s: Profile::new(vec![DIRECT; n]),
        state_s_star: Profile::new(vec![PATH; n]),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub n: usize,
    pub degree: u32,
    pub num_resources: usize,
    pub path_len: usize,
    pub s_is_nash: bool,
    #[serde(rename = "C_S")]
    pub c_s: u32,
    #[serde(rename = "C_S_star")]
    pub c_s_star: u32,
    pub poa_num: u64,
    pub poa_den: u64,
    pub nash_count: usize,
    /// `|R|^(1/(M+1))` in floating point.
    pub predicted: f64,
    /// `n^(M+1) == |R|` and the measured PoA is exactly `n`.
    pub exact: bool,
    pub upper_bound_arbitrary: f64,
}

/// Checks the instance's claims, measuring the price of anarchy by full
/// enumeration of the `2^n` profiles.
pub fn verify(instance: &LowerBoundInstance, cap: u64) -> Result<LowerBoundReport> {
    let game = &instance.game;
    let s_is_nash = equilibria::is_nash(game, &instance.state_s)?;
    let c_s = game.congestion_of(&instance.state_s)?.bottleneck();
    let c_s_star = game.congestion_of(&instance.state_s_star)?.bottleneck();
    let poa = price_of_anarchy(game, cap)?;
    let n = instance.n;
    let root_exact = (n as u128).checked_pow(instance.degree + 1) == Some(instance.num_resources as u128);
    let report = LowerBoundReport {
        n,
        degree: instance.degree,
        num_resources: instance.num_resources,
        path_len: instance.path_len,
        s_is_nash,
        c_s,
        c_s_star,
        poa_num: poa.poa_num,
        poa_den: poa.poa_den,
        nash_count: poa.nash_count,
        predicted: (instance.num_resources as f64).powf(1.0 / f64::from(instance.degree + 1)),
        exact: root_exact && poa.poa_num == n as u64 && poa.poa_den == 1,
        upper_bound_arbitrary: upper_bound_arbitrary(instance.num_resources, instance.degree),
    };
    let mut failures = Vec::new();
    if !s_is_nash {
        failures.push("all-direct state is not a Nash equilibrium".to_string());
    }
    if c_s as usize != n {
        failures.push(format!("C(S) = {c_s}, expected {n}"));
    }
    if c_s_star != 1 {
        failures.push(format!("C(S*) = {c_s_star}, expected 1"));
    }
    if !report.exact {
        failures.push(format!(
            "measured PoA {}/{} differs from n = {n}",
            poa.poa_num, poa.poa_den
        ));
    }
    if failures.is_empty() {
        Ok(report)
    } else {
        Err(Error::LowerBound(failures.join("; ")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub num_resources: usize,
    pub poa_num: u64,
    pub poa_den: u64,
    pub predicted: f64,
    pub upper_bound_arbitrary: f64,
}

impl SweepRow {
    pub fn poa(&self) -> f64 {
        self.poa_num as f64 / self.poa_den as f64
    }
}

/// Generates and verifies the family for every `n` in `ns`.
pub fn sweep(degree: u32, ns: RangeInclusive<usize>, cap: u64) -> Result<Vec<SweepRow>> {
    ns.map(|n| {
        let instance = generate(n, degree)?;
        let r = verify(&instance, cap)?;
        Ok(SweepRow {
            n,
            num_resources: r.num_resources,
            poa_num: r.poa_num,
            poa_den: r.poa_den,
            predicted: r.predicted,
            upper_bound_arbitrary: r.upper_bound_arbitrary,
        })
    })
    .collect()
}

/// Tab-separated table with a header row.
pub fn sweep_tsv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n\tnum_resources\tpoa\tpredicted\tupper_bound_arbitrary\n");
    for r in rows {
        let poa = if r.poa_den == 1 {
            r.poa_num.to_string()
        } else {
            format!("{}/{}", r.poa_num, r.poa_den)
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.3}\t{:.3}\n",
            r.n, r.num_resources, poa, r.predicted, r.upper_bound_arbitrary
        ));
    }
    out
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
