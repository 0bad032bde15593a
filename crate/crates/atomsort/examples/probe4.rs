use atomsort::lattice::*;
use atomsort::pathing::MoveRules;
use atomsort::planner::*;
use atomsort::physics::LossModel;
use atomsort::rng::RandomSource;

fn run_hha4(cap: usize, seeds: u64) {
    let loss = LossModel::default();
    println!("hha4 variant: cap={cap} (relay per algorithm defaults)");
    // partial rate vs region size
    for n in [4usize, 8, 12, 16] {
        let side = atomsort::bench::grid_side_for_region(n);
        let g = GridGeometry::new(side, side, DEFAULT_PITCH_UM).unwrap();
        let pat = make_pattern(g, &PatternKind::Zebra, Region::centered(&g, n, n)).unwrap();
        let rules = MoveRules { max_segments: cap, ..MoveRules::default() };
        let mut partial = 0;
        let mut total = 0;
        for s in 0..seeds {
            let mut rng = RandomSource::new(3000 + n as u64, s);
            let state = load_random(g, &loss, &mut rng).unwrap();
            if !feasibility(&state, &pat).unwrap().solvable { continue; }
            total += 1;
            if plan_cycle(&state, &pat, &rules, Algorithm::Hha4).unwrap().partial { partial += 1; }
        }
        println!("  N={n}: partial {partial}/{total}");
    }
    // 120-site zebra ratio
    let g = GridGeometry::new(20, 20, DEFAULT_PITCH_UM).unwrap();
    let pattern = make_pattern(g, &PatternKind::Zebra, Region::centered(&g, 12, 10)).unwrap();
    let rules = MoveRules { max_segments: cap, ..MoveRules::default() };
    let rules8 = MoveRules::default();
    let mut m8 = vec![];
    let mut m4 = vec![];
    let mut partial4 = 0;
    for s in 0..100u64 {
        let mut rng = RandomSource::new(1000, s);
        let state = load_random(g, &loss, &mut rng).unwrap();
        let p8 = plan_cycle(&state, &pattern, &rules8, Algorithm::Hha8).unwrap();
        let p4 = plan_cycle(&state, &pattern, &rules, Algorithm::Hha4).unwrap();
        if !p8.partial { m8.push(p8.moves.len() as f64); }
        if p4.partial { partial4 += 1 } else { m4.push(p4.moves.len() as f64) }
    }
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!(
        "  120-site zebra: hha4 partial {partial4}/100, mean moves hha8 {:.1} hha4 {:.1} ratio {:.3}",
        mean(&m8), mean(&m4), mean(&m8) / mean(&m4)
    );
}

fn main() {
    for cap in [2usize, 3] {
        run_hha4(cap, 100);
    }
}
