use sglab_core::parisi::*;

fn main() {
    let s = SolverSettings { quad_order: 160, y_step: 0.02, y_max: None };
    let q: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
    let r = refine_continuous(&q, &q, 1.0, 0.0, &s).unwrap();
    for st in &r.stages {
        println!("steps {:2}  value {:.8}  delta {:?}", st.steps, st.value, st.delta);
    }
}
