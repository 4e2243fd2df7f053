//! Point sets checked against an independent reference implementation
//! (unscrambled Sobol with the new Joe-Kuo directions; plain Halton).

use mvrank_core::lds::{self, SequenceKind};

const SOBOL_5D: [[f64; 5]; 8] = [
    [0.5, 0.5, 0.5, 0.5, 0.5],
    [0.75, 0.25, 0.25, 0.25, 0.75],
    [0.25, 0.75, 0.75, 0.75, 0.25],
    [0.375, 0.375, 0.625, 0.875, 0.375],
    [0.875, 0.875, 0.125, 0.375, 0.875],
    [0.625, 0.125, 0.875, 0.625, 0.625],
    [0.125, 0.625, 0.375, 0.125, 0.125],
    [0.1875, 0.3125, 0.9375, 0.4375, 0.5625],
];

const SOBOL_40D_1000: [f64; 40] = [
    0.2197265625,
    0.0966796875,
    0.5185546875,
    0.6767578125,
    0.2802734375,
    0.9072265625,
    0.0458984375,
    0.8994140625,
    0.5009765625,
    0.0693359375,
    0.0849609375,
    0.2548828125,
    0.1611328125,
    0.3837890625,
    0.1435546875,
    0.3701171875,
    0.7197265625,
    0.3447265625,
    0.9912109375,
    0.7255859375,
    0.5224609375,
    0.5498046875,
    0.9501953125,
    0.5400390625,
    0.5830078125,
    0.9072265625,
    0.0400390625,
    0.9794921875,
    0.0595703125,
    0.3408203125,
    0.1474609375,
    0.1455078125,
    0.2958984375,
    0.5927734375,
    0.8017578125,
    0.7705078125,
    0.8486328125,
    0.8310546875,
    0.3076171875,
    0.4794921875,
];
const SOBOL_40D_1024: [f64; 40] = [
    0.00146484375,
    0.37646484375,
    0.44775390625,
    0.48681640625,
    0.55712890625,
    0.84423828125,
    0.24169921875,
    0.58740234375,
    0.69677734375,
    0.67138671875,
    0.82177734375,
    0.92138671875,
    0.70654296875,
    0.33837890625,
    0.13232421875,
    0.85693359375,
    0.85498046875,
    0.19775390625,
    0.53857421875,
    0.34619140625,
    0.52490234375,
    0.12255859375,
    0.82568359375,
    0.50341796875,
    0.80615234375,
    0.19384765625,
    0.76025390625,
    0.83935546875,
    0.31494140625,
    0.04345703125,
    0.99462890625,
    0.96630859375,
    0.37841796875,
    0.79345703125,
    0.19677734375,
    0.67041015625,
    0.84814453125,
    0.44873046875,
    0.23193359375,
    0.12451171875,
];

const HALTON_4D: [[f64; 4]; 5] = [
    [0.5, 0.3333333333333333, 0.2, 0.14285714285714285],
    [0.25, 0.6666666666666666, 0.4, 0.2857142857142857],
    [
        0.75,
        0.1111111111111111,
        0.6000000000000001,
        0.42857142857142855,
    ],
    [0.125, 0.4444444444444444, 0.8, 0.5714285714285714],
    [0.625, 0.7777777777777777, 0.04, 0.7142857142857142],
];

#[test]
fn sobol_leading_points() {
    let ps = lds::sobol(8, 5, 1).unwrap();
    for (i, want) in SOBOL_5D.iter().enumerate() {
        assert_eq!(ps.point(i), want, "point {i}");
    }
}

#[test]
fn sobol_deep_indices_all_dimensions() {
    let ps = lds::sobol(1025, 40, 0).unwrap();
    assert_eq!(ps.point(1000), SOBOL_40D_1000);
    assert_eq!(ps.point(1024), SOBOL_40D_1024);
    let skipped = lds::sobol(25, 40, 1000).unwrap();
    assert_eq!(skipped.point(0), SOBOL_40D_1000);
    assert_eq!(skipped.point(24), SOBOL_40D_1024);
}

#[test]
fn halton_matches_reference() {
    let ps = lds::halton(5, 4).unwrap();
    for (i, want) in HALTON_4D.iter().enumerate() {
        for (a, b) in ps.point(i).iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "point {i}: {a} vs {b}");
        }
    }
}

#[test]
fn every_kind_satisfies_point_set_invariants() {
    for kind in SequenceKind::ALL {
        for (n, d) in [(1, 1), (17, 3), (200, 8), (64, 64)] {
            let ps = lds::generate(kind, n, d, 7).unwrap();
            assert!(ps.satisfies_invariants(), "{kind} n={n} d={d}");
            assert_eq!((ps.len(), ps.dim()), (n, d));
        }
    }
}
