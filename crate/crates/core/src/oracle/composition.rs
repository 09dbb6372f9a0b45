//! Exact decomposition of the BGP risk of composed mechanisms.

use serde::Serialize;

use super::{check_guards, exact_conditional_entropy, output_marginal, PriorTable};
use crate::data::MembershipVector;
use crate::error::Result;
use crate::mechanisms::{Composition, Coupling};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompositionReport {
    pub joint_cel: f64,
    pub per_mech_cels: Vec<f64>,
    /// `joint_cel - sum(per_mech_cels)`.
    pub residual: f64,
    /// Shannon entropy of the joint output distribution.
    pub candidate_lambda_entropy: f64,
    /// KL divergence of the joint output law from the product of its marginals.
    pub candidate_lambda_kl: f64,
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

pub fn composition_decomposition(comp: &Composition, prior: &PriorTable) -> Result<CompositionReport> {
    check_guards(comp, prior)?;
    let joint_cel = exact_conditional_entropy(comp, prior)?;
    let per_mech_cels = comp
        .parts()
        .iter()
        .map(|m| exact_conditional_entropy(m.as_ref(), prior))
        .collect::<Result<Vec<_>>>()?;
    let q = output_marginal(comp, prior)?;
    let marginals = comp
        .parts()
        .iter()
        .map(|m| output_marginal(m.as_ref(), prior))
        .collect::<Result<Vec<_>>>()?;
    let mut kl = 0.0;
    for (x, &qx) in q.iter().enumerate() {
        if qx > 0.0 {
            let product: f64 = comp.split(x).iter().zip(&marginals).map(|(&s, m)| m[s]).product();
            kl += qx * (qx / product).ln();
        }
    }
    Ok(CompositionReport {
        residual: joint_cel - per_mech_cels.iter().sum::<f64>(),
        joint_cel,
        per_mech_cels,
        candidate_lambda_entropy: entropy(&q),
        candidate_lambda_kl: kl,
    })
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// Joint pmf of a shared-uniform coupling found by sweeping the merged CDF
/// breakpoints of all components: every gap between consecutive breakpoints
/// maps to one symbol tuple.
fn coupled_tuples(conds: &[Vec<f64>]) -> Vec<(Vec<usize>, f64)> {
    let mut cuts = vec![0.0, 1.0];
    for c in conds {
        let mut acc = Compensated::default();
        for &p in c {
            acc.add(p);
            cuts.push(acc.value().min(1.0));
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let symbols = conds
            .iter()
            .map(|c| {
                let mut acc = 0.0;
                let mut pick = None;
                for (x, &p) in c.iter().enumerate().filter(|(_, p)| **p > 0.0) {
                    acc += p;
                    pick = Some(x);
                    if mid < acc {
                        break;
                    }
                }
                pick.unwrap_or(0)
            })
            .collect();
        out.push((symbols, len));
    }
    out
}

/// Second enumeration path for cross-checking [`composition_decomposition`]:
/// iterates symbol tuples in the outer loop, uses `H(B,X) - H(X)` instead of
/// posterior logs, builds coupled pmfs by a breakpoint sweep, and accumulates
/// with compensated sums.
pub fn composition_decomposition_dual(comp: &Composition, prior: &PriorTable) -> Result<CompositionReport> {
    check_guards(comp, prior)?;
    let parts = comp.parts();
    let k = prior.population_size();
    let sizes: Vec<usize> = parts.iter().map(|p| p.output_count()).collect();
    let total: usize = sizes.iter().product();

    // conds[b][i] = conditional pmf of part i given b
    let conds: Vec<Vec<Vec<f64>>> = (0..1usize << k)
        .map(|b| {
            let bv = MembershipVector::from_index(b, k);
            parts.iter().map(|p| p.conditional(&bv)).collect()
        })
        .collect();

    // joint[x][b] with x the mixed-radix tuple index
    let mut joint = vec![vec![0.0; 1 << k]; total];
    for b in 0..1usize << k {
        let pb = prior.prob(b);
        if pb == 0.0 {
            continue;
        }
        match comp.coupling() {
            Coupling::Independent => {
                for (x, row) in joint.iter_mut().enumerate() {
                    let mut rest = x;
                    let mut prod = pb;
                    for (i, &n) in sizes.iter().enumerate() {
                        prod *= conds[b][i][rest % n];
                        rest /= n;
                    }
                    row[b] = prod;
                }
            }
            Coupling::SharedUniform => {
                for (symbols, mass) in coupled_tuples(&conds[b]) {
                    let x = symbols.iter().zip(&sizes).rev().fold(0, |acc, (&s, &n)| acc * n + s);
                    joint[x][b] += pb * mass;
                }
            }
        }
    }

    let mut h_bx = Compensated::default();
    let mut h_x = Compensated::default();
    let mut q = vec![0.0; total];
    for (x, row) in joint.iter().enumerate() {
        let mut px = Compensated::default();
        for &j in row {
            if j > 0.0 {
                h_bx.add(-j * j.ln());
                px.add(j);
            }
        }
        q[x] = px.value();
        if q[x] > 0.0 {
            h_x.add(-q[x] * q[x].ln());
        }
    }
    let joint_cel = h_bx.value() - h_x.value();

    // Per-part entropies from the marginal tables of the joint.
    let mut per = Vec::with_capacity(parts.len());
    let mut part_marginals = Vec::with_capacity(parts.len());
    let mut stride = 1;
    for &n in &sizes {
        let mut table = vec![vec![0.0; 1 << k]; n];
        for (x, row) in joint.iter().enumerate() {
            let s = (x / stride) % n;
            for (b, &j) in row.iter().enumerate() {
                table[s][b] += j;
            }
        }
        stride *= n;
        let mut hb = Compensated::default();
        let mut hx = Compensated::default();
        let mut qm = vec![0.0; n];
        for (s, row) in table.iter().enumerate() {
            let mut ps = Compensated::default();
            for &j in row {
                if j > 0.0 {
                    hb.add(-j * j.ln());
                    ps.add(j);
                }
            }
            qm[s] = ps.value();
            if qm[s] > 0.0 {
                hx.add(-qm[s] * qm[s].ln());
            }
        }
        per.push(hb.value() - hx.value());
        part_marginals.push(qm);
    }

    let mut h_q = Compensated::default();
    let mut kl = Compensated::default();
    for (x, &qx) in q.iter().enumerate() {
        if qx <= 0.0 {
            continue;
        }
        h_q.add(-qx * qx.ln());
        let mut rest = x;
        let mut log_prod = 0.0;
        for (i, &n) in sizes.iter().enumerate() {
            log_prod += part_marginals[i][rest % n].ln();
            rest /= n;
        }
        kl.add(qx * (qx.ln() - log_prod));
    }
    let mut residual = Compensated::default();
    residual.add(joint_cel);
    for p in &per {
        residual.add(-p);
    }
    Ok(CompositionReport {
        joint_cel,
        per_mech_cels: per,
        residual: residual.value(),
        candidate_lambda_entropy: h_q.value(),
        candidate_lambda_kl: kl.value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{bitflip_mechanism, MechanismRef, TableMechanism};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn close(a: &CompositionReport, b: &CompositionReport, tol: f64) {
        assert!((a.joint_cel - b.joint_cel).abs() < tol, "{a:?} vs {b:?}");
        assert!((a.residual - b.residual).abs() < tol);
        assert!((a.candidate_lambda_entropy - b.candidate_lambda_entropy).abs() < tol);
        assert!((a.candidate_lambda_kl - b.candidate_lambda_kl).abs() < tol);
        for (x, y) in a.per_mech_cels.iter().zip(&b.per_mech_cels) {
            assert!((x - y).abs() < tol);
        }
    }

    #[test]
    fn single_mechanism() {
        let m: MechanismRef = Arc::new(bitflip_mechanism(2, 0.3).unwrap());
        let comp = Composition::new(vec![m], Coupling::Independent).unwrap();
        let r = composition_decomposition(&comp, &PriorTable::uniform(2).unwrap()).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.per_mech_cels, vec![r.joint_cel]);
    }

    #[test]
    fn two_constant_mechanisms() {
        let k = 3;
        let c: MechanismRef = Arc::new(TableMechanism::constant(k, vec![0.3, 0.7]).unwrap());
        let comp = Composition::new(vec![c.clone(), c], Coupling::Independent).unwrap();
        let r = composition_decomposition(&comp, &PriorTable::uniform(k).unwrap()).unwrap();
        let full = k as f64 * 2f64.ln();
        assert!((r.joint_cel - full).abs() < 1e-12);
        assert!(r.per_mech_cels.iter().all(|h| (h - full).abs() < 1e-12));
        assert!((r.residual + full).abs() < 1e-12);
    }

    #[test]
    fn noiseless_copies_break_the_entropy_identity() {
        let k = 2;
        let m: MechanismRef = Arc::new(bitflip_mechanism(k, 0.0).unwrap());
        let comp = Composition::new(vec![m.clone(), m], Coupling::Independent).unwrap();
        let r = composition_decomposition(&comp, &PriorTable::uniform(k).unwrap()).unwrap();
        assert_eq!((r.joint_cel, r.residual), (0.0, 0.0));
        assert!((r.candidate_lambda_entropy - k as f64 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dual_agrees_on_bitflips() {
        let m: MechanismRef = Arc::new(bitflip_mechanism(2, 0.25).unwrap());
        let prior = PriorTable::uniform(2).unwrap();
        let comp = Composition::new(vec![m.clone(), m], Coupling::Independent).unwrap();
        close(
            &composition_decomposition(&comp, &prior).unwrap(),
            &composition_decomposition_dual(&comp, &prior).unwrap(),
            1e-10,
        );
    }

    #[test]
    fn dual_agrees_on_random_compositions() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..40 {
            let k = rng.gen_range(1..=3);
            let prior = PriorTable::random(k, &mut rng).unwrap();
            let n = rng.gen_range(1..=3);
            let parts: Vec<MechanismRef> = (0..n)
                .map(|_| Arc::new(TableMechanism::random(k, rng.gen_range(1..=4), &mut rng)) as MechanismRef)
                .collect();
            let coupling = if trial % 2 == 0 { Coupling::Independent } else { Coupling::SharedUniform };
            let comp = Composition::new(parts, coupling).unwrap();
            let a = composition_decomposition(&comp, &prior).unwrap();
            close(&a, &composition_decomposition_dual(&comp, &prior).unwrap(), 1e-10);
            let min = a.per_mech_cels.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(a.joint_cel <= min + 1e-9);
        }
    }
}
