use super::{Phase, PolicyKind, PolicyState, NCB_CONSTANT};

/// First index of the maximum; NaN-free inputs assumed.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// `argmax_i μ̂_i + w(n_i)`; unpulled arms have index `+∞`.
pub fn ucb_select(state: &PolicyState) -> usize {
    argmax(
        state
            .counts
            .iter()
            .zip(&state.emp_means)
            .map(|(&n, &mean)| mean + state.ucb_width(n)),
    )
}

/// `argmax_i μ̂_i + C √(max(μ̂_i, 0) ln T / n_i)`; unpulled arms win.
pub fn ncb_select(state: &PolicyState) -> usize {
    let constant = match state.kind {
        PolicyKind::Ncb { ncb_constant, .. } => ncb_constant,
        _ => NCB_CONSTANT,
    };
    argmax(
        state
            .counts
            .iter()
            .zip(&state.emp_means)
            .map(|(&n, &mean)| {
                if n == 0 {
                    f64::INFINITY
                } else {
                    mean + constant * (mean.max(0.0) * state.log_horizon / n as f64).sqrt()
                }
            }),
    )
}

fn round_robin(state: &PolicyState) -> usize {
    ((state.t - 1) % state.k as u64) as usize
}

/// Round-robin for the first `k · m` rounds, UCB afterwards.
pub fn explore_then_ucb_select(state: &PolicyState) -> usize {
    if state.t <= state.k as u64 * state.explore_rounds_per_arm {
        round_robin(state)
    } else {
        ucb_select(state)
    }
}

/// NCB with its exploration prefix: one full round-robin pass, continued
/// until every arm has `μ̂_i n_i ≥ 1` or the prefix cap is reached.
pub(super) fn ncb_step(state: &mut PolicyState) -> usize {
    if state.phase == Phase::PhaseI {
        let elapsed = state.t - 1;
        let first_pass = elapsed < state.k as u64;
        let satisfied = state
            .counts
            .iter()
            .zip(&state.emp_means)
            .all(|(&n, &mean)| mean * n as f64 >= 1.0);
        if first_pass || !(satisfied || elapsed >= state.ncb_prefix_cap) {
            return round_robin(state);
        }
        state.enter_phase_two();
    }
    ncb_select(state)
}
