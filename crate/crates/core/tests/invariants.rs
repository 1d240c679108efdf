mod common;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use nalgebra::{Translation3, UnitQuaternion, Vector3};
use proptest::prelude::*;

use cadquery_core::fixtures;
use cadquery_core::geometry::{parse_obj, write_obj, CadModel, FaceId, LengthUnit, Point3};
use cadquery_core::metrics::{fit_cylinder, part_center};
use cadquery_core::query::{
    evaluate, parse, Arg, BinaryOp, ErrorCategory, Expr, ExprKind, Program, Span, Stmt, UnaryOp,
    Value,
};
use cadquery_core::render::{RgbImage, Scene};
use cadquery_core::segcad::{
    merge_detections, segment_model, Bitmap, OracleProvider, PartInstance, ProviderError, RleMask,
    ScoredMask, SegmentationProvider,
};
use common::small_config;

// ---------- geometry ----------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adjacency_is_symmetric_and_survives_obj_round_trip(
        nx in 1usize..4,
        ny in 1usize..3,
        radius_frac in 0.05f64..0.3,
        segments in prop::sample::select(vec![8usize, 16, 24, 32, 40]),
    ) {
        let pitch = 10.0;
        let model = fixtures::plate_hole_grid(nx, ny, radius_frac * pitch, pitch, segments).to_model();
        let adj = &model.adjacency;
        for a in 0..model.face_count() as FaceId {
            prop_assert!(!adj.neighbors(a).contains(&a));
            for &b in adj.neighbors(a) {
                prop_assert!(adj.neighbors(b).contains(&a));
            }
        }
        prop_assert_eq!(adj.components().len(), 1);
        let reread = CadModel::from_raw(parse_obj(&write_obj(&model)).unwrap(), LengthUnit::Millimeter, "x.obj").unwrap();
        prop_assert_eq!(&reread.adjacency, adj);
    }
}

// ---------- masks ----------

proptest! {
    #[test]
    fn rle_round_trips(w in 1u32..40, h in 1u32..40, seed in any::<u64>(), density in 0.0f64..1.0) {
        let bit = |x: u32, y: u32| {
            let v = (seed ^ ((y as u64) << 32 | x as u64)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            ((v >> 11) as f64 / (1u64 << 53) as f64) < density
        };
        let m = Bitmap::from_fn(w, h, bit);
        let rle = RleMask::encode(&m);
        prop_assert_eq!(rle.size, [h, w]);
        prop_assert_eq!(rle.counts.iter().sum::<u64>(), (w * h) as u64);
        prop_assert!(rle.counts[1..].iter().all(|&c| c > 0));
        let json = serde_json::to_string(&rle).unwrap();
        let back: RleMask = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.decode().unwrap(), m);
    }

    #[test]
    fn merging_is_idempotent_disjoint_and_order_free(
        sets in prop::collection::vec(prop::collection::btree_set(0u32..30, 1..5), 0..12),
        rotate in 0usize..12,
    ) {
        let parts: Vec<PartInstance> = sets.iter().cloned().map(PartInstance::new).collect();
        let merged = merge_detections(parts.clone());
        let faces = |v: &[PartInstance]| v.iter().map(|p| p.face_ids.clone()).collect::<Vec<_>>();
        for (i, a) in merged.iter().enumerate() {
            for b in &merged[i + 1..] {
                prop_assert!(a.face_ids.is_disjoint(&b.face_ids));
            }
        }
        let all: BTreeSet<u32> = sets.iter().flatten().copied().collect();
        let covered: BTreeSet<u32> = merged.iter().flat_map(|p| p.face_ids.iter().copied()).collect();
        prop_assert_eq!(all, covered);
        prop_assert_eq!(faces(&merge_detections(merged.clone())), faces(&merged));
        let mut rotated = parts;
        if !rotated.is_empty() {
            let k = rotate % rotated.len();
            rotated.rotate_left(k);
        }
        prop_assert_eq!(faces(&merge_detections(rotated)), faces(&merged));
    }
}

// ---------- query language ----------

const KEYWORDS: &[&str] = &["let", "solution", "true", "false", "and", "or", "not"];

fn ident() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_]{0,6}".prop_filter("keyword", |s| !KEYWORDS.contains(&s.as_str()))
}

fn expr(kind: ExprKind) -> Expr {
    Expr {
        kind,
        span: Span::default(),
    }
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-1e6f64..1e6).prop_map(|v| expr(ExprKind::Number(v))),
        "[a-zA-Z0-9 \"\\\\\n\t]{0,8}".prop_map(|s| expr(ExprKind::Str(s))),
        any::<bool>().prop_map(|b| expr(ExprKind::Bool(b))),
        ident().prop_map(|s| expr(ExprKind::Ident(s))),
    ];
    let ops = vec![
        BinaryOp::Or,
        BinaryOp::And,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Ge,
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
    ];
    leaf.prop_recursive(4, 32, 4, move |inner| {
        let arg = prop_oneof![
            inner.clone().prop_map(Arg::Positional),
            (ident(), inner.clone()).prop_map(|(name, value)| Arg::Named { name, value }),
            (ident(), inner.clone()).prop_map(|(param, body)| Arg::Lambda { param, body }),
        ];
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(|v| expr(ExprKind::List(v))),
            (ident(), prop::collection::vec(arg, 0..3))
                .prop_map(|(name, args)| expr(ExprKind::Call { name, args })),
            (
                prop::sample::select(vec![UnaryOp::Neg, UnaryOp::Not]),
                inner.clone()
            )
                .prop_map(|(op, e)| expr(ExprKind::Unary {
                    op,
                    operand: Box::new(e)
                })),
            (prop::sample::select(ops.clone()), inner.clone(), inner).prop_map(|(op, l, r)| expr(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(l),
                    rhs: Box::new(r)
                }
            )),
        ]
    })
}

fn program_strategy() -> impl Strategy<Value = Program> {
    (
        prop::collection::vec((ident(), expr_strategy()), 0..3),
        expr_strategy(),
    )
        .prop_map(|(lets, solution)| {
            let mut statements: Vec<Stmt> = lets
                .into_iter()
                .map(|(name, value)| Stmt::Let {
                    name,
                    value,
                    span: Span::default(),
                })
                .collect();
            statements.push(Stmt::Solution {
                value: solution,
                span: Span::default(),
            });
            Program { statements }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printed_programs_parse_back_to_the_same_tree(program in program_strategy()) {
        let text = program.to_string();
        let parsed = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&parsed, &program, "{}", text);
        prop_assert_eq!(parsed.to_string(), text);
    }
}

fn unit_scene() -> &'static (Scene, OracleProvider) {
    static SCENE: OnceLock<(Scene, OracleProvider)> = OnceLock::new();
    SCENE.get_or_init(|| {
        let s = common::scene(&fixtures::unit_cube());
        let o = OracleProvider::from_model(s.model());
        (s, o)
    })
}

fn run(src: &str) -> Result<Value, ErrorCategory> {
    let (scene, oracle) = unit_scene();
    let program = parse(src).map_err(|e| e.category())?;
    evaluate(&program, scene, oracle, &small_config())
        .map(|a| a.value)
        .map_err(|e| e.category())
}

fn mm_of(v: &Value) -> f64 {
    match v {
        Value::Number {
            value,
            unit: Some(u),
        } => cadquery_core::query::convert(*value, *u, LengthUnit::Millimeter),
        other => panic!("not a length: {other}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn units_never_mix_silently(a in -1e3f64..1e3, b in -1e3f64..1e3) {
        prop_assert_eq!(run(&format!("solution = mm({a:?}) + m({b:?});")), Err(ErrorCategory::Reasoning));
        prop_assert_eq!(run(&format!("solution = m({a:?}) - mm({b:?});")), Err(ErrorCategory::Reasoning));
        prop_assert_eq!(run(&format!("solution = mm({a:?}) * mm({b:?});")), Err(ErrorCategory::Reasoning));

        let sum = run(&format!("solution = mm({a:?}) + mm(m({b:?}));")).unwrap();
        prop_assert!((mm_of(&sum) - (a + 1000.0 * b)).abs() <= 1e-9 * (a.abs() + 1000.0 * b.abs() + 1.0));

        let lt = run(&format!("solution = mm({a:?}) < m({b:?});")).unwrap();
        prop_assert_eq!(lt, Value::Bool(a < 1000.0 * b));

        let back = run(&format!("solution = mm(m(mm({a:?})));")).unwrap();
        prop_assert!((mm_of(&back) - a).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

// ---------- metrics ----------

fn rigid() -> impl Strategy<Value = (UnitQuaternion<f64>, Vector3<f64>)> {
    (
        prop::array::uniform4(-1.0f64..1.0)
            .prop_filter("non-zero", |q| q.iter().map(|v| v * v).sum::<f64>() > 1e-3),
        prop::array::uniform3(-100.0f64..100.0),
    )
        .prop_map(|(q, t)| {
            let q =
                UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
            (q, Vector3::from(t))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cylinder_fit_is_pose_equivariant((rot, t) in rigid(), exp in -2i32..4) {
        let scale = 2f64.powi(exp);
        let base = fixtures::cylinder_wall(5.0, 12.0, 32).to_model();
        let all: BTreeSet<FaceId> = (0..base.face_count() as FaceId).collect();
        let before = fit_cylinder(&base, &all).unwrap();
        let c0 = part_center(&base, &all).unwrap();

        let iso = Translation3::from(t) * rot;
        let moved = base.transformed(|p| iso * Point3::from(p.coords * scale));
        let after = fit_cylinder(&moved, &all).unwrap();
        prop_assert!((after.radius - scale * before.radius).abs() <= 1e-9 * scale * before.radius);
        prop_assert!((after.depth - scale * before.depth).abs() <= 1e-9 * scale * before.depth);
        let expected_axis = rot * before.axis;
        prop_assert!(after.axis.dot(&expected_axis).abs() > 1.0 - 1e-12);
        let c1 = part_center(&moved, &all).unwrap();
        let expected_center = iso * Point3::from(c0.coords * scale);
        prop_assert!((c1 - expected_center).norm() <= 1e-9 * (1.0 + t.norm() + scale * 20.0));
    }
}

// ---------- thresholds ----------

/// Oracle masks with per-instance scores.
struct ScoredOracle {
    oracle: OracleProvider,
    scores: Vec<f64>,
}

impl SegmentationProvider for ScoredOracle {
    fn segment(
        &self,
        image: &RgbImage,
        prompt: &str,
        t: f64,
    ) -> Result<Vec<ScoredMask>, ProviderError> {
        let masks = self.oracle.segment(image, prompt, t)?;
        let instances = self.oracle.instances(prompt);
        Ok(masks
            .into_iter()
            .map(|mut m| {
                let faces: BTreeSet<FaceId> = (0..image.height)
                    .flat_map(|y| (0..image.width).map(move |x| (x, y)))
                    .filter(|&(x, y)| m.mask.get(x, y))
                    .filter_map(|(x, y)| {
                        cadquery_core::render::palette::face_for_color(image.get(x, y))
                    })
                    .collect();
                let idx = instances
                    .iter()
                    .position(|i| !i.is_disjoint(&faces))
                    .unwrap();
                m.score = self.scores[idx];
                m
            })
            .collect())
    }
}

fn holes_scene() -> &'static Scene {
    static SCENE: OnceLock<Scene> = OnceLock::new();
    SCENE.get_or_init(|| common::scene(&fixtures::plate_with_four_holes()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn raising_the_score_threshold_only_removes_parts(
        scores in prop::array::uniform4(0.0f64..1.0),
        t1 in 0.0f64..1.0,
        dt in 0.0f64..0.5,
    ) {
        let scene = holes_scene();
        let provider = ScoredOracle { oracle: OracleProvider::from_model(scene.model()), scores: scores.to_vec() };
        let run = |t: f64| {
            let cfg = cadquery_core::segcad::PipelineConfig { box_score_threshold: t, ..small_config() };
            segment_model(scene, "hole", &provider, &cfg).unwrap().into_iter().map(|p| p.face_ids).collect::<BTreeSet<_>>()
        };
        let t2 = (t1 + dt).min(1.0);
        let low = run(t1);
        let high = run(t2);
        prop_assert!(high.is_subset(&low));
        prop_assert_eq!(low.len(), scores.iter().filter(|&&s| s >= t1).count());
    }
}
