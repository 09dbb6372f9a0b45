//! DP privacy profiles and the DP bound on membership advantage.

use crate::data::MembershipVector;
use crate::error::{param, Error, Result};
use crate::mechanisms::DiscreteMechanism;

/// Smallest `delta` for which bit flipping with probability `flip` is
/// `(epsilon, delta)`-DP with respect to one membership bit.
/// A noiseless mechanism (`flip = 0`) has `delta = 1` at every finite epsilon.
pub fn privacy_profile_bitflip(flip: f64, epsilon: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&flip) || !(epsilon >= 0.0) {
        return Err(param("need flip in [0, 0.5] and epsilon >= 0"));
    }
    if flip == 0.0 {
        return Ok(1.0);
    }
    Ok(((1.0 - flip) - epsilon.exp() * flip).max(0.0))
}

/// Brute force `max_W Pr_b'[W] - e^eps Pr_b[W]` over every event `W` of the
/// output space and every ordered pair of memberships differing in one bit.
pub fn privacy_profile_exhaustive(mech: &dyn DiscreteMechanism, epsilon: f64) -> Result<f64> {
    let n = mech.output_count();
    let k = mech.membership_len();
    if n > 16 || k > 10 {
        return Err(Error::Capability("event search needs at most 16 outputs and K <= 10".into()));
    }
    let e = epsilon.exp();
    let mut best: f64 = 0.0;
    for i in 0..1usize << k {
        let b = MembershipVector::from_index(i, k);
        let pb = mech.conditional(&b);
        for bit in 0..k {
            let pn = mech.conditional(&MembershipVector::from_index(i ^ (1 << bit), k));
            for event in 0..1usize << n {
                let (mut num, mut den) = (0.0, 0.0);
                for x in (0..n).filter(|x| event >> x & 1 == 1) {
                    num += pn[x];
                    den += pb[x];
                }
                best = best.max(num - e * den);
            }
        }
    }
    Ok(best)
}

/// `(e^eps - 1 + 2 delta) / (e^eps + 1)`, written in a form that stays finite
/// for huge epsilon.
pub fn dp_membership_advantage_bound(epsilon: f64, delta: f64) -> Result<f64> {
    if !(epsilon >= 0.0) || !(0.0..=1.0).contains(&delta) {
        return Err(param("need epsilon >= 0 and delta in [0, 1]"));
    }
    let t = (-epsilon).exp();
    Ok((1.0 - t + 2.0 * delta * t) / (1.0 + t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::bitflip_mechanism;

    #[test]
    fn profile_examples() {
        for eps in [0.0, 0.3, 2.0] {
            assert_eq!(privacy_profile_bitflip(0.5, eps).unwrap(), 0.0);
            assert_eq!(privacy_profile_bitflip(0.0, eps).unwrap(), 1.0);
        }
        assert_eq!(privacy_profile_bitflip(0.25, 0.0).unwrap(), 0.5);
        assert!(privacy_profile_bitflip(0.6, 0.0).is_err());
    }

    #[test]
    fn closed_form_matches_event_search() {
        for q in [0.0, 0.05, 0.2, 0.25, 0.4, 0.5] {
            let m = bitflip_mechanism(1, q).unwrap();
            for i in 0..=30 {
                let eps = i as f64 * 0.1;
                let closed = privacy_profile_bitflip(q, eps).unwrap();
                let brute = privacy_profile_exhaustive(&m, eps).unwrap();
                assert!((closed - brute).abs() < 1e-12, "q={q} eps={eps}: {closed} vs {brute}");
            }
        }
        // The product structure makes K = 2 agree with K = 1.
        let m2 = bitflip_mechanism(2, 0.3).unwrap();
        for eps in [0.0, 0.5, 1.0] {
            let brute = privacy_profile_exhaustive(&m2, eps).unwrap();
            assert!((brute - privacy_profile_bitflip(0.3, eps).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_examples() {
        assert_eq!(dp_membership_advantage_bound(0.0, 0.0).unwrap(), 0.0);
        assert!((dp_membership_advantage_bound(3f64.ln(), 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((dp_membership_advantage_bound(1e6, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((dp_membership_advantage_bound(50.0, 0.3).unwrap() - 1.0).abs() < 1e-15);
        for (e, d) in [(0.7, 0.1), (2.0, 0.0), (0.1, 0.9)] {
            let direct = (f64::exp(e) - 1.0 + 2.0 * d) / (f64::exp(e) + 1.0);
            assert!((dp_membership_advantage_bound(e, d).unwrap() - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn bound_is_tight_for_bitflip() {
        // Optimal attacker's advantage 1 - 2q meets the bound at every epsilon.
        for q in [0.1, 0.25, 0.4] {
            for eps in [0.0, 0.5, 1.0, 2.0] {
                let bound = dp_membership_advantage_bound(eps, privacy_profile_bitflip(q, eps).unwrap()).unwrap();
                assert!(bound >= 1.0 - 2.0 * q - 1e-12);
            }
            let tight = ((1.0 - q) / q).ln();
            let bound = dp_membership_advantage_bound(tight, 0.0).unwrap();
            assert!((bound - (1.0 - 2.0 * q)).abs() < 1e-12);
        }
    }
}
