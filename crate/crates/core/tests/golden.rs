//! Bit-exact replay of a seeded RSP run. Regenerate the reference with
//! `cargo test -p submod-swarm --test golden -- --ignored` after an intended
//! change to the generators or planners.

use std::path::PathBuf;

use submod_swarm::rng::{label, stream};
use submod_swarm::scenarios::{gen_area_coverage, AreaCoverageParams};
use submod_swarm::solvers::{rsp_plan, RoundPolicy};

fn reference() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/rsp_seed7_n50_nd4.txt")
}

fn render() -> String {
    let seed = 7;
    let sc = gen_area_coverage(50, &AreaCoverageParams::default(), &mut stream(seed, &[label("instance")])).unwrap();
    let r = rsp_plan(&sc.problem, &sc.matroid, RoundPolicy::Fixed(4), None, &mut stream(seed, &[label("solver")])).unwrap();
    let join = |v: Vec<String>| v.join(" ");
    let rounds = r.round_of_agent.clone().unwrap();
    format!(
        "rounds {}\nactions {}\ngains {}\nvalue {:016x}\n",
        join(rounds.iter().map(ToString::to_string).collect()),
        join((0..50).map(|i| r.selection.action_of(i).unwrap().to_string()).collect()),
        join(r.per_agent_gain.iter().map(|g| format!("{:016x}", g.to_bits())).collect()),
        r.value.to_bits(),
    )
}

#[test]
fn seeded_rsp_run_matches_reference() {
    let want = std::fs::read_to_string(reference()).expect("reference file");
    assert_eq!(render(), want);
}

#[test]
#[ignore]
fn regenerate_reference() {
    std::fs::write(reference(), render()).unwrap();
}
