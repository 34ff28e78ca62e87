//! Scratch calibration: exact relative variance and cost on gridworld.
use scope_core::*;

fn main() {
    for n in [10usize] {
        for coupling in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let mut relvar_scope = 0.0;
            let mut relvar_odi = 0.0;
            let mut relcost_scope = 0.0;
            let mut relcost_odi = 0.0;
            let mut worst_scope_var: f64 = 0.0;
            let count = 10usize;
            for env_seed in [7u64] {
                let mut spec = GridworldSpec::new(n, env_seed);
                spec.reward_cost_coupling = coupling;
                let m = make_gridworld(&spec).unwrap();
                let policies = make_target_policies(&m, count, 11).unwrap();
                for pi in &policies {
                    let scope = synthesize_scope(&m, pi, &SafetyConfig { epsilon: 0.0 }, &SolverConfig::default()).unwrap().policy;
                    let odi = synthesize_odi(&m, pi).unwrap();
                    let v_pi = pdis_variance_closed_form(&m, pi, pi).unwrap();
                    let v_s = pdis_variance_closed_form(&m, pi, &scope).unwrap();
                    let v_o = pdis_variance_closed_form(&m, pi, &odi).unwrap();
                    // point-mass start at state 0
                    let (rv_s, rv_o) = (v_s.get(0, 0) / v_pi.get(0, 0), v_o.get(0, 0) / v_pi.get(0, 0));
                    relvar_scope += rv_s; relvar_odi += rv_o;
                    worst_scope_var = worst_scope_var.max(rv_s);
                    let (_qc, vc_pi) = cost_values(&m, pi).unwrap();
                    let (_qc, vc_s) = cost_values(&m, &scope).unwrap();
                    let (_qc, vc_o) = cost_values(&m, &odi).unwrap();
                    let jc_pi = initial_value(&m, &vc_pi);
                    relcost_scope += initial_value(&m, &vc_s) / jc_pi;
                    relcost_odi += initial_value(&m, &vc_o) / jc_pi;
                }
            }
            let k = count as f64;
            println!(
                "n={n} coupling={coupling:.2}: scope relvar={:.3} (worst {:.3}) relcost={:.3} | odi relvar={:.3} relcost={:.3}",
                relvar_scope / k, worst_scope_var, relcost_scope / k, relvar_odi / k, relcost_odi / k
            );
        }
    }
}
