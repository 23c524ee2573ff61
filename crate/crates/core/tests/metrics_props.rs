use mask_reconcile::metrics::{boxes_from_mask, dice, precision_recall};
use mask_reconcile::BinaryMask;
use proptest::prelude::*;

fn pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (1usize..20, 1usize..20, 0.0f64..1.0).prop_flat_map(|(w, h, p)| {
        let cells = prop::collection::vec(prop::bool::weighted(p), w * h);
        (cells.clone(), cells).prop_map(move |(a, b)| {
            let to = |v: Vec<bool>| {
                BinaryMask::new(w, h, v.into_iter().map(u8::from).collect()).unwrap()
            };
            (to(a), to(b))
        })
    })
}

/// 8-connected component count by union-find.
fn components(m: &BinaryMask) -> usize {
    let (w, h) = m.dims();
    let mut parent: Vec<usize> = (0..w * h).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for y in 0..h {
        for x in 0..w {
            if !m.get(x, y) {
                continue;
            }
            for (dx, dy) in [(1isize, 0isize), (0, 1), (1, 1), (-1, 1)] {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0
                    && (nx as usize) < w
                    && (ny as usize) < h
                    && m.get(nx as usize, ny as usize)
                {
                    let (a, b) = (
                        find(&mut parent, y * w + x),
                        find(&mut parent, ny as usize * w + nx as usize),
                    );
                    parent[a] = b;
                }
            }
        }
    }
    (0..w * h)
        .filter(|&i| m.labels()[i] == 1 && find(&mut parent, i) == i)
        .count()
}

proptest! {
    #[test]
    fn dice_axioms((a, b) in pair()) {
        let d = dice(&a, &b).unwrap();
        prop_assert_eq!(d, dice(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn dice_is_f1((a, b) in pair()) {
        let (p, r) = precision_recall(&a, &b).unwrap();
        if a.count_ones() > 0 && b.count_ones() > 0 && p + r > 0.0 {
            prop_assert!((dice(&a, &b).unwrap() - 2.0 * p * r / (p + r)).abs() < 1e-12);
        }
    }

    #[test]
    fn boxes_are_tight_and_cover((m, _) in pair()) {
        let boxes = boxes_from_mask(&m);
        prop_assert_eq!(boxes.len(), components(&m));
        for y in 0..m.height() {
            for x in 0..m.width() {
                if m.get(x, y) {
                    prop_assert!(boxes.iter().any(|b| b.contains(x, y)));
                }
            }
        }
        for b in &boxes {
            let row = |y| (b.x_min..b.x_max).any(|x| m.get(x, y));
            let col = |x| (b.y_min..b.y_max).any(|y| m.get(x, y));
            prop_assert!(row(b.y_min) && row(b.y_max - 1) && col(b.x_min) && col(b.x_max - 1));
        }
    }
}
