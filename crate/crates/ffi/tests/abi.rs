use std::ffi::{CStr, CString};
use std::ptr;

use slavc::harness::center_prior_map;
use slavc::numerics::RandomSource;
use slavc::slavc::{loss_and_grad, random_batch, BatchDims, Branch, Hyper, LossKind};
use slavc_ffi::*;

fn last_error() -> String {
    let p = slavc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_map(h: usize, w: usize, values: &[f64]) -> *mut SlavcMap {
    let mut map = ptr::null_mut();
    let status = unsafe { slavc_map_new(h, w, values.as_ptr(), &mut map) };
    assert_eq!(status, SlavcStatus::Ok);
    map
}

#[test]
fn map_file_round_trip() {
    let values: Vec<f64> = (0..12).map(|k| k as f64 * 0.25 - 1.0).collect();
    let map = new_map(3, 4, &values);
    unsafe {
        assert_eq!(slavc_map_height(map), 3);
        assert_eq!(slavc_map_width(map), 4);
        let mut conf = 0.0;
        assert_eq!(slavc_map_confidence(map, &mut conf), SlavcStatus::Ok);
        assert_eq!(conf, 1.75);

        let dir = tempfile::tempdir().unwrap();
        let file = CString::new(dir.path().join("m.vslm").to_str().unwrap()).unwrap();
        assert_eq!(slavc_map_write(map, file.as_ptr()), SlavcStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(slavc_map_read(file.as_ptr(), &mut back), SlavcStatus::Ok);
        let mut out = vec![0.0; 12];
        assert_eq!(
            slavc_map_values(back, out.as_mut_ptr(), 12),
            SlavcStatus::Ok
        );
        // values are exactly representable in f32
        assert_eq!(out, values);
        assert_eq!(
            slavc_map_values(back, out.as_mut_ptr(), 11),
            SlavcStatus::InvalidArgument
        );
        slavc_map_free(back);
        slavc_map_free(map);
        slavc_map_free(ptr::null_mut());
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut map = ptr::null_mut();
        assert_eq!(
            slavc_map_new(2, 2, ptr::null(), &mut map),
            SlavcStatus::NullPointer
        );
        assert!(last_error().contains("values"));

        let missing = CString::new("/nonexistent/dir/x.vslm").unwrap();
        assert_eq!(slavc_map_read(missing.as_ptr(), &mut map), SlavcStatus::Io);
        assert!(map.is_null());

        let mut conf = 0.0;
        assert_eq!(
            slavc_map_confidence(ptr::null(), &mut conf),
            SlavcStatus::NullPointer
        );

        let mut value = 0.0;
        let flat = vec![0.5; 2 * 2 * (2 + 2 * 4)];
        let status = slavc_loss(
            SlavcLoss::Slavc,
            2,
            2,
            2,
            2,
            -1.0,
            flat.as_ptr(),
            ptr::null(),
            &mut value,
            ptr::null_mut(),
        );
        assert_eq!(status, SlavcStatus::InvalidArgument);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn center_prior_matches_library() {
    let mut map = ptr::null_mut();
    unsafe {
        assert_eq!(slavc_map_center_prior(7, 5, 0.3, &mut map), SlavcStatus::Ok);
        let mut out = vec![0.0; 35];
        assert_eq!(slavc_map_values(map, out.as_mut_ptr(), 35), SlavcStatus::Ok);
        let expected = center_prior_map(7, 5, 0.3).unwrap();
        assert_eq!(out, expected.values().data());
        slavc_map_free(map);
    }
}

#[test]
fn losses_match_library() {
    let dims = BatchDims {
        batch: 3,
        height: 2,
        width: 3,
        dim: 4,
    };
    let mut rng = RandomSource::new(11);
    let online = random_batch(&mut rng, dims, Branch::Online);
    let momentum = random_batch(&mut rng, dims, Branch::Momentum);
    let hyper = Hyper::new(0.07).unwrap();
    let (on, mo) = (online.to_flat(), momentum.to_flat());
    for (c, kind) in [
        (SlavcLoss::Micl, LossKind::Micl),
        (SlavcLoss::Slavc, LossKind::Slavc),
        (SlavcLoss::Full, LossKind::Full),
    ] {
        let (expected, g) = loss_and_grad(kind, &online, &momentum, &hyper).unwrap();
        let mut value = f64::NAN;
        let mut grad = vec![0.0; on.len()];
        let status = unsafe {
            slavc_loss(
                c,
                3,
                2,
                3,
                4,
                0.07,
                on.as_ptr(),
                mo.as_ptr(),
                &mut value,
                grad.as_mut_ptr(),
            )
        };
        assert_eq!(status, SlavcStatus::Ok);
        assert_eq!(value, expected);
        assert_eq!(grad, g.to_flat());
    }
    // momentum is mandatory only for the full loss
    let mut value = 0.0;
    unsafe {
        let s = slavc_loss(
            SlavcLoss::Micl,
            3,
            2,
            3,
            4,
            0.07,
            on.as_ptr(),
            ptr::null(),
            &mut value,
            ptr::null_mut(),
        );
        assert_eq!(s, SlavcStatus::Ok);
        let s = slavc_loss(
            SlavcLoss::Full,
            3,
            2,
            3,
            4,
            0.07,
            on.as_ptr(),
            ptr::null(),
            &mut value,
            ptr::null_mut(),
        );
        assert_eq!(s, SlavcStatus::NullPointer);
    }
}

#[test]
fn inference_map_peaks_at_matching_cell() {
    let (h, w, d) = (2, 2, 3);
    let audio = [0.0, 1.0, 0.0];
    let mut visual = vec![0.0; h * w * d];
    for cell in 0..h * w {
        visual[cell * d] = 1.0;
    }
    visual[3 * d] = 0.0;
    visual[3 * d + 1] = 1.0;
    let mut map = ptr::null_mut();
    unsafe {
        let s = slavc_inference_map(
            SlavcInference::Both,
            h,
            w,
            d,
            audio.as_ptr(),
            audio.as_ptr(),
            visual.as_ptr(),
            visual.as_ptr(),
            &mut map,
        );
        assert_eq!(s, SlavcStatus::Ok);
        let mut out = vec![0.0; 4];
        slavc_map_values(map, out.as_mut_ptr(), 4);
        let best = (0..4).max_by(|&a, &b| out[a].total_cmp(&out[b])).unwrap();
        assert_eq!(best, 3);

        let mut iou = 0.0;
        let boxes = [1u32, 1, 2, 2];
        let s = slavc_map_iou(
            map,
            SlavcThresholdKind::TopFraction,
            0.25,
            boxes.as_ptr(),
            1,
            &mut iou,
        );
        assert_eq!(s, SlavcStatus::Ok);
        assert_eq!(iou, 1.0);
        let bad = [1u32, 1, 1, 2];
        let s = slavc_map_iou(
            map,
            SlavcThresholdKind::TopFraction,
            0.25,
            bad.as_ptr(),
            1,
            &mut iou,
        );
        assert_eq!(s, SlavcStatus::InvalidArgument);
        slavc_map_free(map);
    }
}

#[test]
fn metrics_over_outcome_arrays() {
    let items = [
        SlavcOutcome {
            positive: true,
            iou: 0.9,
            confidence: 0.8,
        },
        SlavcOutcome {
            positive: false,
            iou: f64::NAN,
            confidence: 0.7,
        },
        SlavcOutcome {
            positive: true,
            iou: 0.2,
            confidence: 0.6,
        },
        SlavcOutcome {
            positive: true,
            iou: 0.7,
            confidence: 0.1,
        },
    ];
    let (mut acc, mut f1, mut delta, mut ap) = (0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(
            slavc_loc_acc(items.as_ptr(), 4, 0.5, &mut acc),
            SlavcStatus::Ok
        );
        assert_eq!(
            slavc_max_f1(items.as_ptr(), 4, 0.5, &mut f1, &mut delta),
            SlavcStatus::Ok
        );
        assert_eq!(
            slavc_average_precision(items.as_ptr(), 4, 0.5, &mut ap),
            SlavcStatus::Ok
        );
    }
    assert!((acc - 2.0 / 3.0).abs() < 1e-12);
    // ranked: TP, FP, FP(low iou), TP -> AP = (1 + 2/4) / 3
    assert!((ap - 0.5).abs() < 1e-12);
    // predicting everything: TP 2, FP 2 (the low-iou positive counts as a
    // FP, not a FN), FN 0 -> P 1/2, R 1, F1 2/3. Every other level is lower.
    assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(delta, f64::NEG_INFINITY);

    let negatives = [SlavcOutcome {
        positive: false,
        iou: 0.0,
        confidence: 0.3,
    }];
    let s = unsafe { slavc_average_precision(negatives.as_ptr(), 1, 0.5, &mut ap) };
    assert_eq!(s, SlavcStatus::UndefinedMetric);
}
