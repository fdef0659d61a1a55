//! Target-network synchronization.

use crate::nn::ParamSet;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetSync {
    /// Copy every `c` updates (at steps where `step % c == 0`).
    Hard(u64),
    /// Exponential blend `target = tau * online + (1 - tau) * target` on
    /// every call.
    Soft(f64),
}

pub fn target_sync(online: &ParamSet, target: &mut ParamSet, mode: TargetSync, step: u64) {
    match mode {
        TargetSync::Hard(c) => {
            if step % c.max(1) == 0 {
                *target = online.clone();
            }
        }
        TargetSync::Soft(tau) => {
            for i in 0..target.len() {
                let src = online.at(i).1.data();
                for (t, &o) in target.at_mut(i).data_mut().iter_mut().zip(src) {
                    *t = tau * o + (1.0 - tau) * *t;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn ps(v: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.push("w", Tensor::from_vec(&[1], vec![v]));
        p
    }

    #[test]
    fn hard_copies_on_boundary_only() {
        let online = ps(1.0);
        let mut target = ps(0.0);
        target_sync(&online, &mut target, TargetSync::Hard(100), 1);
        assert_eq!(target.get("w").data()[0], 0.0);
        target_sync(&online, &mut target, TargetSync::Hard(100), 100);
        assert_eq!(target.get("w").data()[0], 1.0);
        // step 0 also copies (initialization boundary)
        let mut t0 = ps(0.5);
        target_sync(&online, &mut t0, TargetSync::Hard(100), 0);
        assert_eq!(t0.get("w").data()[0], 1.0);
    }

    #[test]
    fn soft_blend_twice() {
        // target 0, online 1: two tau=0.5 blends land at 0.75
        let online = ps(1.0);
        let mut target = ps(0.0);
        target_sync(&online, &mut target, TargetSync::Soft(0.5), 0);
        target_sync(&online, &mut target, TargetSync::Soft(0.5), 1);
        assert!((target.get("w").data()[0] - 0.75).abs() < 1e-15);
        // tau = 1 is a hard copy
        let mut t = ps(9.0);
        target_sync(&online, &mut t, TargetSync::Soft(1.0), 0);
        assert_eq!(t.get("w").data()[0], 1.0);
    }
}
