use prodform::classifier::{self, GridSample, Side, Tolerances};
use prodform::gallery;
use prodform::immersion::DiffConfig;

#[test]
#[ignore]
fn probe_reduction() {
    let cfg = DiffConfig::default();
    let tols = Tolerances::default();
    for name in ["slice-great-s2", "diagonal-small-sphere", "generic-graph", "product-circles", "slice-small-s3"] {
        let inst = gallery::instantiate(name).unwrap();
        let grid = inst.grid(2, &cfg);
        let gs = GridSample::collect(&inst.immersion, &grid, &cfg).unwrap();
        for side in [Side::Left, Side::Right] {
            let t0 = std::time::Instant::now();
            match classifier::detect_codim_reduction(&inst.immersion, &gs, side, &tols, &cfg) {
                Ok(v) => println!(
                    "{name} {side}: l={} rank={} par={:.2e} cont={:.2e} curv={:.2e} H={:.2e} agree={} diag={:?} notes={:?} [{:?}]",
                    v.reducible_by, v.witness_rank, v.parallel_residual, v.containment_residual,
                    v.curvature_residual, v.mean_curvature_residual, v.routes_agree,
                    v.diagonal.map(|d| (d.rank_n1, d.applies, d.n1_parallel_residual, d.t_shift_residual, d.similarity_defect)),
                    v.notes, t0.elapsed()
                ),
                Err(e) => println!("{name} {side}: ERROR {e}"),
            }
        }
    }
}
