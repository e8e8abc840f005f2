//! Welfarist-UCB: permutation-block uniform exploration with a data-adaptive
//! stopping rule, followed by UCB.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{confidence_width, ucb_select, Phase, PolicyError, PolicyKind, PolicyState};

/// A uniformly random permutation of `0..k`.
pub fn draw_permutation<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    perm
}

/// Phase-I stopping rule: some arm has `μ̂_i > w_i` and
/// `n_i > C p_a² σ² ln T / (μ̂_i − w_i)²`, with `w_i` the policy's width.
/// Always false while any arm is unpulled.
pub fn phase1_should_terminate(state: &PolicyState) -> bool {
    let constant = match state.kind {
        PolicyKind::WelfaristUcb {
            phase1_constant, ..
        } => phase1_constant,
        _ => super::PHASE1_CONSTANT,
    };
    if state.counts.contains(&0) {
        return false;
    }
    let numerator = constant * state.p_a * state.p_a * state.sigma_sq * state.log_horizon;
    state
        .counts
        .iter()
        .zip(&state.emp_means)
        .any(|(&n, &mean)| {
            let width = confidence_width(n, state.sigma_sq, state.log_horizon)
                .map_or(f64::INFINITY, |w| state.width_scale * w);
            let gap = mean - width;
            gap > 0.0 && n as f64 > numerator / (gap * gap)
        })
}

/// Round-`t` choice of Welfarist-UCB.
///
/// The stopping rule is evaluated before every Phase-I pull. When it fires,
/// `tau = t − 1`, the rest of the current block is dropped and the round is
/// played by UCB. If it never fires Phase I simply lasts the whole horizon.
pub fn welfarist_select<R: Rng + ?Sized>(
    state: &mut PolicyState,
    rng: &mut R,
) -> Result<usize, PolicyError> {
    if state.t > state.horizon {
        return Err(PolicyError::HorizonExhausted {
            t: state.t,
            horizon: state.horizon,
        });
    }
    if state.phase == Phase::PhaseI {
        if phase1_should_terminate(state) {
            state.enter_phase_two();
        } else {
            let pos = ((state.t - 1) % state.k as u64) as usize;
            if pos == 0 {
                state.block_perm = draw_permutation(state.k, rng);
            }
            return Ok(state.block_perm[pos]);
        }
    }
    Ok(ucb_select(state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn one_arm(mean: f64, n: u64, p: f64) -> PolicyState {
        PolicyState::new(PolicyKind::welfarist(), 1, 100, 1.0, p)
            .unwrap()
            .with_log_horizon(1.0)
            .with_stats(vec![n], vec![mean])
    }

    #[test]
    fn termination_fires_for_strong_arm() {
        // w = 0.25, threshold = 192 / 2.75^2 ≈ 25.39 < 128.
        assert!(phase1_should_terminate(&one_arm(3.0, 128, 0.0)));
    }

    #[test]
    fn termination_blocked_by_width() {
        // μ̂ = 0.2 ≤ w = 0.25.
        assert!(!phase1_should_terminate(&one_arm(0.2, 128, 0.0)));
    }

    #[test]
    fn termination_scales_with_p_squared() {
        // p_a = -2 → threshold = 768 / 7.5625 ≈ 101.55 < 128.
        assert!(phase1_should_terminate(&one_arm(3.0, 128, -2.0)));
        // and at n = 101 (w ≈ 0.2814, threshold ≈ 103.8) it does not fire.
        assert!(!phase1_should_terminate(&one_arm(3.0, 101, -2.0)));
    }

    #[test]
    fn termination_waits_for_every_arm() {
        let s = PolicyState::new(PolicyKind::welfarist(), 2, 100, 1.0, 0.0)
            .unwrap()
            .with_log_horizon(1.0)
            .with_stats(vec![128, 0], vec![3.0, 0.0]);
        assert!(!phase1_should_terminate(&s));
    }

    #[test]
    fn first_block_covers_every_arm() {
        let mut rng = RngStream::new(5, 0).generator();
        for k in 1..8 {
            let mut s = PolicyState::new(PolicyKind::welfarist(), k, 1000, 1.0, 0.0).unwrap();
            let mut seen = vec![0; k];
            for _ in 0..k {
                let a = welfarist_select(&mut s, &mut rng).unwrap();
                assert_eq!(s.phase(), Phase::PhaseI);
                seen[a] += 1;
                s.update(a, 0.0).unwrap();
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn zero_means_never_leave_phase_one() {
        let mut rng = RngStream::new(6, 0).generator();
        let mut s = PolicyState::new(PolicyKind::welfarist(), 4, 1000, 1.0, 0.0).unwrap();
        for _ in 0..1000 {
            let a = welfarist_select(&mut s, &mut rng).unwrap();
            assert_eq!(s.phase(), Phase::PhaseI);
            s.update(a, 0.0).unwrap();
        }
        assert_eq!(s.tau(), None);
        assert!(s.counts().iter().all(|&c| c == 250));
    }

    #[test]
    fn transition_sets_tau_and_is_permanent() {
        let mut rng = RngStream::new(7, 0).generator();
        let mut s = PolicyState::new(PolicyKind::welfarist(), 3, 5000, 1.0, 0.0).unwrap();
        let means = [10.0, 5.0, 1.0];
        let mut switched_at = None;
        for _ in 0..5000 {
            let before = s.t();
            let a = welfarist_select(&mut s, &mut rng).unwrap();
            if s.phase() == Phase::PhaseII && switched_at.is_none() {
                switched_at = Some(before);
                assert_eq!(s.tau(), Some(before - 1));
            }
            if switched_at.is_some() {
                assert_eq!(s.phase(), Phase::PhaseII);
            }
            s.update(a, means[a]).unwrap();
        }
        assert!(switched_at.is_some());
        assert_eq!(s.counts().iter().sum::<u64>(), 5000);
    }
}
