//! Plain CSV writers for distributions, comparisons and sweeps.

use std::fmt::Write;

use crate::dist::DelayDistribution;

/// Shortest round-trip rendering, with exponent notation for tiny values.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.abs() >= 1e-4 {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// `k,pmf,cdf` rows for `k = 0..=d.last_significant()`.
pub fn distribution_csv(d: &DelayDistribution) -> String {
    let mut out = String::from("k,pmf,cdf\n");
    for k in 0..=d.last_significant() {
        let _ = writeln!(out, "{k},{},{}", fmt_num(d.pmf()[k]), fmt_num(d.cdf()[k]));
    }
    out
}

/// Analytic and simulated columns side by side over the longer of the two
/// printed ranges. Past its own truncation point a distribution contributes
/// zero pmf and its last cdf value.
pub fn compare_csv(calc: &DelayDistribution, sim: &DelayDistribution) -> String {
    let end = calc.last_significant().max(sim.last_significant());
    let mut out = String::from("k,pmf_calc,cdf_calc,pmf_sim,cdf_sim\n");
    for k in 0..=end {
        let _ = writeln!(
            out,
            "{k},{},{},{},{}",
            fmt_num(calc.pmf_at(k)),
            fmt_num(calc.cdf_at(k)),
            fmt_num(sim.pmf_at(k)),
            fmt_num(sim.cdf_at(k)),
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub calc: f64,
    pub sim: f64,
    pub golfar: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("p,calc,sim,golfar\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_num(r.p),
            fmt_num(r.calc),
            fmt_num(r.sim),
            fmt_num(r.golfar)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(0.25), "0.25");
        assert_eq!(fmt_num(30.0), "30");
        assert_eq!(fmt_num(1.5e-7), "1.5e-7");
    }

    #[test]
    fn distribution_rows() {
        let d = DelayDistribution::point_mass(2, 6).unwrap();
        assert_eq!(distribution_csv(&d), "k,pmf,cdf\n0,0,0\n1,0,0\n2,1,1\n");
        let g = DelayDistribution::geometric(0.5, 3).unwrap();
        assert_eq!(
            distribution_csv(&g),
            "k,pmf,cdf\n0,0,0\n1,0.5,0.5\n2,0.25,0.75\n3,0.125,0.875\n"
        );
    }

    #[test]
    fn compare_pads_shorter_side() {
        let calc = DelayDistribution::geometric(0.5, 3).unwrap();
        let sim = DelayDistribution::from_samples(&[1, 1, 2, 5]).unwrap();
        let csv = compare_csv(&calc, &sim);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[2], "1,0.5,0.5,0.5,0.5");
        assert_eq!(lines[6], "5,0,0.875,0.25,1");
    }

    #[test]
    fn sweep_rows() {
        let rows = [SweepRow {
            p: 0.3,
            calc: 3.76,
            sim: 3.75,
            golfar: 30.0,
        }];
        assert_eq!(sweep_csv(&rows), "p,calc,sim,golfar\n0.3,3.76,3.75,30\n");
    }
}
