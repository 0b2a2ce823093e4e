//! Maps built from `(μ, ν)` against the `(f, g)` that generated `ν`.

use robust_amput::fixtures::{single_jump, suite_template, uniform_pair, Template};
use robust_amput::leftcurtain::{build_by_ode, LeftCurtainMap, OdeOptions};

fn near_jump(t: &Template, x: f64) -> bool {
    t.f_jump.is_some_and(|(xj, _, _)| (x - xj).abs() < 1e-9)
}

fn check_against_table(t: &Template, map: &LeftCurtainMap, tol: f64) {
    for s in map.samples() {
        if t.mu.density_at(s.x) == 0.0 || near_jump(t, s.x) {
            continue;
        }
        let (f, g) = t.table.eval(s.x);
        assert!((s.f - f).abs() < tol && (s.g - g).abs() < tol, "x = {}: ({}, {}) vs ({f}, {g})", s.x, s.f, s.g);
    }
}

#[test]
fn single_jump_structure() {
    let t = single_jump().unwrap();
    let map = LeftCurtainMap::build(&t.mu, &t.nu).unwrap();
    check_against_table(&t, &map, 1e-10);

    let fj = map.f_jumps();
    assert_eq!(fj.len(), 1, "{fj:?}");
    assert!((fj[0].x - 3.5).abs() < 1e-9);
    assert!((fj[0].left - 2.0).abs() < 1e-9 && (fj[0].right + 1.0).abs() < 1e-9);
    assert!(map.g_jumps().is_empty() && map.unlocalized_jumps().is_empty());

    let rp = map.regeneration_pairs();
    assert_eq!(rp.len(), 1);
    assert!((rp[0].f_prime + 1.0).abs() < 1e-9 && (rp[0].x_prime - 2.0).abs() < 1e-8, "{rp:?}");

    assert!(map.monotonicity().is_clean());
    let (m, e) = map.residuals();
    assert!(m < 1e-11 && e < 1e-11, "{m} {e}");
}

#[test]
fn random_templates_round_trip() {
    for seed in 0..120 {
        let t = suite_template(seed).unwrap();
        let map = LeftCurtainMap::build(&t.mu, &t.nu).unwrap();
        check_against_table(&t, &map, 1e-9);
        assert!(map.monotonicity().is_clean(), "seed {seed}");
        assert_eq!(map.f_jumps().len(), usize::from(t.f_jump.is_some()), "seed {seed}: {:?}", map.f_jumps());
        if let Some((x, l, r)) = t.f_jump {
            let j = map.f_jumps()[0];
            assert!((j.x - x).abs() < 1e-9 && (j.left - l).abs() < 1e-9 && (j.right - r).abs() < 1e-9, "seed {seed}");
        }
        assert_eq!(map.regeneration_pairs().len(), t.regeneration.len(), "seed {seed}");
        for (p, &(f, x)) in map.regeneration_pairs().iter().zip(&t.regeneration) {
            assert!((p.f_prime - f).abs() < 1e-9 && (p.x_prime - x).abs() < 1e-8, "seed {seed}");
        }
    }
}

#[test]
fn ode_matches_uniform_closed_form() {
    let (mu, nu) = uniform_pair(200);
    let map = build_by_ode(&mu, &nu, -1.0, OdeOptions::default()).unwrap();
    for s in map.samples().iter().filter(|s| s.x > -1.0 && s.x <= 1.0) {
        assert!((s.f + (s.x + 3.0) / 2.0).abs() < 5e-8, "f({}) = {}", s.x, s.f);
        assert!((s.g - (3.0 * s.x + 1.0) / 2.0).abs() < 5e-8, "g({}) = {}", s.x, s.g);
    }
}
