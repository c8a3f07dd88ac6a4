use limsup_core::cantor::{build, rational_fixture, BuildParams, GenerationNode, NodeKind};
use limsup_core::ifs::CylinderMeasure;

fn descendants<'a>(n: &'a GenerationNode, kind: NodeKind, out: &mut Vec<&'a GenerationNode>) {
    for c in &n.children {
        if c.kind == kind {
            out.push(c);
        }
        descendants(c, kind, out);
    }
}

#[test]
fn depth_two_invariants() {
    let mu = CylinderMeasure::lebesgue(2, 1, 48).unwrap();
    let (balls, targets) = rational_fixture(400, 2.0).unwrap();
    let params = BuildParams::rational(2.0, 2, 9);
    let c = build(&mu, &balls, &targets, &params).unwrap();
    assert_eq!(c.generations.len(), 2);

    for n in c.root.walk() {
        for ch in &n.children {
            assert!(n.region.contains(&ch.region), "child region escapes its parent");
        }
        if !n.children.is_empty() {
            let sum: f64 = n.children.iter().map(|c| c.eta).sum();
            assert!((sum - n.eta).abs() <= 1e-12 * n.eta.max(1.0));
        }
        if n.kind == NodeKind::Target {
            let b = n.parent_ball.as_ref().unwrap();
            assert!(b.bbox().contains(&n.region));
            // An interval of length l has s-content exactly l^s for s <= 1.
            let side = n.region.hi[0] - n.region.lo[0];
            assert!(side.powf(params.s(n.generation)) >= mu.ball_mass(b).lo, "content test fails at generation {}", n.generation);
        }
    }

    for g1 in c.root.targets(1) {
        let mut gen2 = Vec::new();
        descendants(g1, NodeKind::Target, &mut gen2);
        for (i, x) in gen2.iter().enumerate() {
            let bx = x.parent_ball.as_ref().unwrap();
            for y in &gen2[i + 1..] {
                let by = y.parent_ball.as_ref().unwrap();
                let gap = (bx.center()[0] - by.center()[0]).abs();
                assert!(gap > 4.0 * (bx.radius() + by.radius()), "4-dilates of {bx:?} and {by:?} meet");
            }
        }
    }
}
