mod common;

use common::*;
use ehlc_core::model::quantize_gamma_channel;
use ehlc_core::oracle::*;
use ehlc_core::{FrameAlloc, HarvestProfile, LscFrame, LtmFrame, Strategy, System};

fn small(r: f64, b_max: f64) -> System {
    let ch = quantize_gamma_channel(1.0, 1.0, 5.0, 3).unwrap();
    System::new(frame(0.01), battery(r, b_max), ch).unwrap()
}

#[test]
fn zero_energy_gives_zero() {
    let sys = small(5.0, f64::INFINITY);
    for s in Strategy::ALL {
        let o = grid_search_single_frame(&sys, s, 0.0, 0.0, GridSpec::default()).unwrap();
        assert_eq!(o.objective, 0.0);
    }
}

#[test]
fn budget_is_enforced() {
    let sys = small(5.0, f64::INFINITY);
    let g = GridSpec::new(400, 1000, false).unwrap();
    assert!(grid_search_single_frame(&sys, Strategy::Lsc, 0.01, 0.01, g).is_err());
    assert!(GridSpec::new(1, 1000, false).is_err());
}

#[test]
fn results_are_feasible() {
    let sys = small(5.0, f64::INFINITY);
    for s in Strategy::ALL {
        for (b0, u) in [(0.01, 0.0), (0.0, 0.05), (0.02, 0.1)] {
            let o = grid_search_single_frame(&sys, s, b0, u, GridSpec::default()).unwrap();
            assert!(feasibility_check(&sys, &o.frames, b0).is_feasible(1e-9));
        }
    }
}

#[test]
fn refinement_stays_within_bound() {
    let sys = small(5.0, f64::INFINITY);
    for s in Strategy::ALL {
        let coarse = grid_search_single_frame(&sys, s, 0.01, 0.05, GridSpec::new(20, 100_000_000, false).unwrap()).unwrap();
        let fine = grid_search_single_frame(&sys, s, 0.01, 0.05, GridSpec::new(40, 100_000_000, false).unwrap()).unwrap();
        assert!(fine.objective >= coarse.objective - coarse.bound);
    }
}

#[test]
fn two_frames_without_capacity_decompose() {
    let sys = small(5.0, 0.0);
    let grid = GridSpec::new(20, 100_000_000, true).unwrap();
    let profile = HarvestProfile::new(vec![0.1, 0.02]).unwrap();
    for s in Strategy::ALL {
        let two = grid_search_two_frame(&sys, s, &profile, grid).unwrap();
        let a = grid_search_single_frame(&sys, s, 0.0, 0.1, grid).unwrap();
        let b = grid_search_single_frame(&sys, s, 0.0, 0.02, grid).unwrap();
        assert!((two.objective - a.objective - b.objective).abs() < 1e-12);
    }
}

#[test]
fn two_frames_symmetric_harvest() {
    let sys = small(2.0, 0.05);
    let grid = GridSpec::new(20, 100_000_000, true).unwrap();
    let profile = HarvestProfile::new(vec![0.05, 0.05]).unwrap();
    let o = grid_search_two_frame(&sys, Strategy::Lsc, &profile, grid).unwrap();
    let v: Vec<f64> = o.frames.iter().map(|f| f.objective(&sys)).collect();
    assert!((v[0] - v[1]).abs() <= o.bound);
}

#[test]
fn two_frame_bound_brackets_solver() {
    let sys = small(5.0, f64::INFINITY);
    let grid = GridSpec::new(30, 100_000_000, true).unwrap();
    let profile = HarvestProfile::new(vec![0.1, 0.0]).unwrap();
    for s in Strategy::ALL {
        let o = grid_search_two_frame(&sys, s, &profile, grid).unwrap();
        let v: f64 = s.solve_two_frame(&sys, &profile).unwrap().iter().map(|f| f.objective(&sys)).sum();
        assert!(v >= o.objective - o.bound, "{s}: {v} vs {} - {}", o.objective, o.bound);
    }
}

#[test]
fn zero_allocation_is_feasible() {
    let sys = small(5.0, 0.1);
    let frames = vec![FrameAlloc::Ltm(LtmFrame::zero(0.0, 3)), FrameAlloc::Lsc(LscFrame::zero(0.0, 3))];
    let rep = feasibility_check(&sys, &frames, 0.02);
    assert!(rep.is_feasible(0.0));
    assert_eq!(rep.causality, vec![0.02, 0.02]);
}

#[test]
fn overdraw_is_flagged() {
    let sys = small(0.0, f64::INFINITY);
    let b0 = 0.01;
    let mut f = Strategy::Lsc.solve_frame(&sys, b0, 0.0).unwrap();
    let FrameAlloc::Lsc(x) = &mut f else { unreachable!() };
    x.e += 1e-6;
    let rep = feasibility_check(&sys, &[f], b0);
    assert_eq!(rep.first_causality_violation(1e-9), Some(0));
}
