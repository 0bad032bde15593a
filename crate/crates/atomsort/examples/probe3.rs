use atomsort::gridio::{render_overlay, state_to_ascii};
use atomsort::lattice::*;
use atomsort::pathing::MoveRules;
use atomsort::planner::*;
use atomsort::physics::LossModel;
use atomsort::replay::replay;
use atomsort::rng::RandomSource;

fn main() {
    let n = 4usize;
    let side = atomsort::bench::grid_side_for_region(n);
    let g = GridGeometry::new(side, side, DEFAULT_PITCH_UM).unwrap();
    let pattern = make_pattern(g, &PatternKind::Zebra, Region::centered(&g, n, n)).unwrap();
    let loss = LossModel::default();
    let rules = MoveRules::default();
    let mut shown = 0;
    for s in 0..50u64 {
        let mut rng = RandomSource::new(3004, s);
        let state = load_random(g, &loss, &mut rng).unwrap();
        if !feasibility(&state, &pattern).unwrap().solvable {
            continue;
        }
        let p4 = plan_cycle(&state, &pattern, &rules, Algorithm::Hha4).unwrap();
        if p4.partial && shown < 2 {
            shown += 1;
            println!("seed {s}: PARTIAL after {} moves; residual {:?}", p4.moves.len(), p4.residual);
            println!("initial:\n{}", state_to_ascii(&state));
            let outcome = replay(&p4, &state, &pattern).unwrap();
            println!("legal={} final:\n{}", outcome.legal, render_overlay(&outcome.final_state, &pattern).unwrap());
        }
    }
}
