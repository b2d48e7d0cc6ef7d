//! Transit yield at the preset operating point.

use cqed::config::RunConfig;
use cqed::phasor::DetectStatistic;
use cqed::pipeline::ensemble_yield;
use cqed::tables::{build_tables, SteadyTables};
use cqed::PhysicalParams;

fn preset(n_grid: usize) -> (RunConfig, PhysicalParams, SteadyTables) {
    let mut cfg = RunConfig::preset(1);
    cfg.tables.n_grid = n_grid;
    if n_grid != 201 {
        cfg.tables.refinement_checks = 0;
    }
    let p = cfg.physical();
    let t = build_tables(&p, &cfg.tables.options()).unwrap();
    (cfg, p, t)
}

/// At least 30% of preset drops should produce a detected transit.
#[test]
fn preset_yield_reaches_thirty_percent() {
    let (cfg, p, t) = preset(201);
    let (detected, _) = ensemble_yield(&cfg, &p, &t, 100, 1).unwrap();
    println!("preset yield {detected}/100");
    assert!(detected >= 30, "preset yield {detected}/100 is below 30%");
}

/// Pins the measured yield so detector or transit changes show up.
#[test]
fn preset_yield_regression() {
    let (mut cfg, p, t) = preset(101);
    let (dip, _) = ensemble_yield(&cfg, &p, &t, 100, 1).unwrap();
    cfg.detect.statistic = DetectStatistic::Excursion;
    let (excursion, _) = ensemble_yield(&cfg, &p, &t, 100, 1).unwrap();
    assert_eq!((dip, excursion), (6, 7));
}

#[test]
fn preset_ensemble_has_an_event() {
    let (cfg, p, t) = preset(101);
    let (detected, snr) = ensemble_yield(&cfg, &p, &t, 100, 7).unwrap();
    assert!(detected >= 1);
    assert!(snr.unwrap() > 0.0);
}
