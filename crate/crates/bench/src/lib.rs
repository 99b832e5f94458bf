//! Fixtures shared by the benchmarks.

use objcbf::harness::{Scenario, Simulation};

/// The semantic-gap scene: two drawers, one of each stationarity label.
pub fn two_drawer_scene() -> Scenario {
    Scenario::from_json(include_str!("../../../scenarios/semantic_gap.json")).expect("shipped scenario parses")
}

/// A simulation advanced `ticks` steps so its map and field are populated.
pub fn warmed_up(scenario: &Scenario, ticks: usize) -> Simulation {
    let mut sim = Simulation::new(scenario).expect("scenario is valid");
    for _ in 0..ticks {
        sim.step().expect("tick succeeds");
    }
    sim
}
