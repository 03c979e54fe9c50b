//! Synthetic fixtures run through the analysis stages end to end.

use pulsepipe::bp::{render_lcd, OtsuDetector};
use pulsepipe::dsp::WINDOW_LEN;
use pulsepipe::fhr::estimate_fhr_samples;
use pulsepipe::quality::{quality_report, HeuristicClassifier, QualityClass, QualityThresholds};
use pulsepipe::synth::{salt_and_pepper, synth_class, synth_doppler, DopplerParams};
use pulsepipe::{classify, transcribe_bp};

#[test]
fn every_class_fixture_classifies_as_itself() {
    let clf = HeuristicClassifier::new(QualityThresholds::default());
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for class in QualityClass::ALL {
        for seed in 0..20 {
            let seg = synth_class(class, seed);
            predicted.push(classify(&seg, &clf).unwrap().class);
            truth.push(class);
        }
    }
    let report = quality_report(&predicted, &truth).unwrap();
    for class in QualityClass::ALL {
        assert!(report.class_accuracy(class).unwrap() >= 0.95, "{class}\n{report}");
    }
}

#[test]
fn fhr_tracks_the_generator_across_the_band() {
    for bpm in [65.0, 100.0, 140.0, 180.0, 235.0] {
        let x = synth_doppler(bpm, 3.75, 0.05, 11).unwrap().into_samples();
        assert_eq!(x.len(), WINDOW_LEN);
        let est = estimate_fhr_samples(&x).unwrap();
        assert!((est.bpm - bpm).abs() <= 1.0, "{bpm}: {est:?}");
    }
}

#[test]
fn noisy_source_still_validates_its_parameters() {
    let p = DopplerParams::new(300.0, 0.05, 1);
    assert!(p.validate().is_err());
}

#[test]
fn lcd_round_trip_survives_light_noise() {
    for (i, (s, d, p)) in [(104, 65, 72), (188, 111, 58), (92, 61, 140)].into_iter().enumerate() {
        let mut img = render_lcd(s, d, p, 320, 240).unwrap();
        salt_and_pepper(&mut img, 0.05, i as u64);
        let r = transcribe_bp(&img, &OtsuDetector).unwrap();
        assert_eq!((r.systolic, r.diastolic, r.pulse), (s as u32, d as u32, p as u32));
        assert!(r.valid);
    }
}
