use atomsort::gridio::render_overlay;
use atomsort::lattice::*;
use atomsort::pathing::MoveRules;
use atomsort::planner::*;
use atomsort::physics::LossModel;
use atomsort::replay::replay;
use atomsort::rng::RandomSource;

fn main() {
    let g = GridGeometry::new(20, 20, DEFAULT_PITCH_UM).unwrap();
    let pattern = make_pattern(g, &PatternKind::Zebra, Region::centered(&g, 12, 10)).unwrap();
    let loss = LossModel::default();
    let rules = MoveRules::default();
    let depths = compute_depths(&pattern);
    for s in 0..6u64 {
        let mut rng = RandomSource::new(1000, s);
        let state = load_random(g, &loss, &mut rng).unwrap();
        let p8 = plan_cycle(&state, &pattern, &rules, Algorithm::Hha8).unwrap();
        if !p8.partial {
            println!("seed {s}: ok, {} moves", p8.moves.len());
            continue;
        }
        println!("seed {s}: PARTIAL, {} moves, residual:", p8.moves.len());
        for (site, class) in &p8.residual {
            println!(
                "  {site} {class:?} demand {:?} depth {:?}",
                pattern.demand(*site),
                depths.depth(&pattern, *site)
            );
        }
        let outcome = replay(&p8, &state, &pattern).unwrap();
        println!("{}", render_overlay(&outcome.final_state, &pattern).unwrap());
    }
}
