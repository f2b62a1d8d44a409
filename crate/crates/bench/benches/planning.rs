use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trafficmap::costmap::{
    compose_master, inflate, static_layer, CostGrid, FleetConfig, InflationConfig, LaneConfig, LayerInputs,
    LayerStack, RegionHoldings,
};
use trafficmap::grid::{GridMeta, Pose2};
use trafficmap::map_io::{LaneGrid, MaskGrid, Occupancy, OccupancyGrid, Region};
use trafficmap::planning::{dwa_step, plan_global, DwaConfig, MotionLimits};
use trafficmap::sim::RobotState;

const RADIUS: f64 = 0.25;

/// Square map at 0.1 m with scattered obstacle blocks, kept clear near
/// the corners so planners have somewhere to start and end.
fn occupancy(cells: usize, seed: u64) -> OccupancyGrid {
    let meta = GridMeta::new(0.1, 0.0, 0.0, cells, cells);
    let mut occ = OccupancyGrid::filled(meta, Occupancy::Free);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cells / 4 {
        let (c0, r0) = (rng.gen_range(0..cells - 4), rng.gen_range(0..cells - 4));
        let (w, h) = (rng.gen_range(1..4), rng.gen_range(1..4));
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                let near_corner = (c < 15 && r < 15) || (c + 15 > cells && r + 15 > cells);
                if !near_corner {
                    occ.set(c, r, Occupancy::Occupied);
                }
            }
        }
    }
    occ
}

fn master(occ: &OccupancyGrid) -> CostGrid {
    inflate(&static_layer(occ), &InflationConfig::for_radius(RADIUS))
}

fn bench_inflate(c: &mut Criterion) {
    let mut group = c.benchmark_group("inflate");
    for cells in [100, 200, 400] {
        let grid = static_layer(&occupancy(cells, 1));
        let cfg = InflationConfig::for_radius(RADIUS);
        group.bench_with_input(BenchmarkId::from_parameter(cells), &grid, |b, g| b.iter(|| inflate(black_box(g), &cfg)));
    }
    group.finish();
}

fn bench_compose(c: &mut Criterion) {
    let occ = occupancy(200, 2);
    let meta = occ.meta;
    let mut mask = MaskGrid::empty(meta);
    let mut lanes = LaneGrid::empty(meta);
    for r in 80..120 {
        for col in 80..120 {
            mask.set(col, r, true);
        }
        for col in 0..200 {
            lanes.set(col, r + 40, Some(if r < 100 { 0 } else { 18000 }));
        }
    }
    let stack = LayerStack {
        static_map: true,
        prohibition: Some(254),
        lane: Some(LaneConfig::default()),
        fleet: Some(FleetConfig::for_radius(RADIUS)),
        region: true,
        inflation: Some(InflationConfig::for_radius(RADIUS)),
    };
    let fleet: Vec<(String, Pose2)> = (0..4).map(|k| (format!("r{k}"), Pose2::new(3.0 + 4.0 * k as f64, 5.0, 0.0))).collect();
    let regions = vec![Region::new("zone", vec![(2.0, 14.0), (6.0, 14.0), (6.0, 18.0), (2.0, 18.0)]).unwrap()];
    let holdings = RegionHoldings::new();
    let inputs = LayerInputs {
        occupancy: &occ,
        prohibition: Some(&mask),
        lanes: Some(&lanes),
        fleet: &fleet,
        regions: &regions,
        holdings: &holdings,
    };
    let pose = Pose2::new(1.0, 1.0, 0.3);
    c.bench_function("compose_master/200", |b| {
        b.iter(|| compose_master(&stack, "r0", black_box(&pose), &inputs).unwrap())
    });
}

fn bench_plan(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan_global");
    for cells in [100, 200, 400] {
        let grid = master(&occupancy(cells, 3));
        let size = cells as f64 * 0.1;
        let (start, goal) = (Pose2::new(0.5, 0.5, 0.0), Pose2::new(size - 0.5, size - 0.5, 0.0));
        group.bench_with_input(BenchmarkId::from_parameter(cells), &grid, |b, g| {
            b.iter(|| plan_global(black_box(g), &start, &goal).unwrap())
        });
    }
    group.finish();
}

fn bench_dwa(c: &mut Criterion) {
    let grid = master(&occupancy(200, 4));
    let start = Pose2::new(0.5, 0.5, 0.8);
    let goal = Pose2::new(19.5, 19.5, 0.0);
    let path = plan_global(&grid, &start, &goal).unwrap();
    let state = RobotState {
        name: "amr".into(),
        pose: start,
        v: 0.3,
        w: 0.0,
        radius: RADIUS,
        priority: 0,
        goal,
    };
    let local: Vec<(f64, f64)> = path.waypoints.iter().take(15).copied().collect();
    let target = local.last().map(|&(x, y)| Pose2::new(x, y, 0.0)).unwrap();
    let limits = MotionLimits::default();
    let cfg = DwaConfig::default();
    c.bench_function("dwa_step/11x21", |b| {
        b.iter(|| dwa_step(black_box(&state), &limits, &grid, &local, &target, &cfg, 0.1))
    });
}

criterion_group!(benches, bench_inflate, bench_compose, bench_plan, bench_dwa);
criterion_main!(benches);
