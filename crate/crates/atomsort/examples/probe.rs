use atomsort::bench::*;
use atomsort::lattice::*;
use atomsort::pathing::MoveRules;
use atomsort::planner::*;
use atomsort::physics::LossModel;
use atomsort::rng::RandomSource;

fn main() {
    let t0 = std::time::Instant::now();
    // Criterion 1 probe: 120-site zebra on 20x20.
    let g = GridGeometry::new(20, 20, DEFAULT_PITCH_UM).unwrap();
    let pattern = make_pattern(g, &PatternKind::Zebra, Region::centered(&g, 12, 10)).unwrap();
    let loss = LossModel::default();
    let rules = MoveRules::default();
    let mut m8 = vec![];
    let mut m4 = vec![];
    let mut partial8 = 0;
    let mut partial4 = 0;
    let mut t8 = vec![];
    let mut tg = vec![];
    let mut greedy_longer = 0;
    for s in 0..100u64 {
        let mut rng = RandomSource::new(1000, s);
        let state = load_random(g, &loss, &mut rng).unwrap();
        let p8 = plan_cycle(&state, &pattern, &rules, Algorithm::Hha8).unwrap();
        let p4 = plan_cycle(&state, &pattern, &rules, Algorithm::Hha4).unwrap();
        let pg = greedy_baseline(&state, &pattern, &rules).unwrap();
        if p8.partial { partial8 += 1 } else { m8.push(p8.moves.len() as f64) }
        if p4.partial { partial4 += 1 } else { m4.push(p4.moves.len() as f64) }
        t8.push(p8.stats().n_traversed_sites as f64);
        tg.push(pg.stats().n_traversed_sites as f64);
        if pg.stats().n_traversed_sites > p8.stats().n_traversed_sites { greedy_longer += 1; }
    }
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!("[c1] hha8 mean moves {:.1} (partial {partial8}), hha4 mean moves {:.1} (partial {partial4}), ratio {:.3}",
        mean(&m8), mean(&m4), mean(&m8)/mean(&m4));
    println!("[c9] traversed hha8 {:.1} greedy {:.1}, greedy longer on {greedy_longer}/100", mean(&t8), mean(&tg));
    println!("  elapsed {:.1}s", t0.elapsed().as_secs_f64());

    // Criterion 3 probe: hha8 non-partial on feasible instances, 500 seeds.
    let t1 = std::time::Instant::now();
    let mut feasible = 0;
    let mut nonpartial = 0;
    for s in 0..500u64 {
        let mut rng = RandomSource::new(2000, s);
        let state = load_random(g, &loss, &mut rng).unwrap();
        if !feasibility(&state, &pattern).unwrap().solvable { continue; }
        feasible += 1;
        let p = plan_cycle(&state, &pattern, &rules, Algorithm::Hha8).unwrap();
        if !p.partial { nonpartial += 1; }
    }
    println!("[c3] hha8 non-partial {nonpartial}/{feasible} feasible ({:.1}s)", t1.elapsed().as_secs_f64());

    // hha4 partial rate vs N.
    for n in [4usize, 8, 12, 16] {
        let side = grid_side_for_region(n);
        let gg = GridGeometry::new(side, side, DEFAULT_PITCH_UM).unwrap();
        let pat = make_pattern(gg, &PatternKind::Zebra, Region::centered(&gg, n, n)).unwrap();
        let mut partial = 0;
        let mut total = 0;
        for s in 0..100u64 {
            let mut rng = RandomSource::new(3000 + n as u64, s);
            let state = load_random(gg, &loss, &mut rng).unwrap();
            if !feasibility(&state, &pat).unwrap().solvable { continue; }
            total += 1;
            if plan_cycle(&state, &pat, &rules, Algorithm::Hha4).unwrap().partial { partial += 1; }
        }
        println!("[c3] N={n} (side {side}): hha4 partial {partial}/{total}");
    }

    // Criterion 2 probe: single species Nm/N.
    let mask = Mask { width: 10, height: 10, cells: vec![true; 100] };
    let pat = make_pattern(g, &PatternKind::SingleSpeciesMask(mask), Region::centered(&g, 10, 10)).unwrap();
    let mut single_loss = LossModel::default();
    single_loss.r_a = 1.0;
    let mut ratios = vec![];
    for s in 0..100u64 {
        let mut rng = RandomSource::new(4000, s);
        let state = load_random(g, &single_loss, &mut rng).unwrap();
        let defects = count_defects(&state, &pat).total();
        if defects == 0 { continue; }
        let p = plan_single_species(&state, &pat, &rules).unwrap();
        if p.partial { println!("  single-species partial at seed {s}!"); continue; }
        ratios.push(p.moves.len() as f64 / defects as f64);
    }
    println!("[c2] Nm/N mean {:.3} over {} instances", mean(&ratios), ratios.len());
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
