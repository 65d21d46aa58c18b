//! Regressions on the calibration corpus (2D, N = 128, ε = 1/16, seeds 1-5,
//! u_1 around its grid minimum, M = 256): the frozen three-circles constant
//! and the stream-function solve of the pipeline.

use anderson_core::constants::THREE_CIRCLES_C_CAL;
use anderson_core::verify::Corpus;

#[test]
fn pipeline_corpus_within_frozen_bounds() {
    let mut corpus = Corpus::default();
    for seed in 1..=5 {
        let r = corpus.pipeline(seed).unwrap();
        assert!(
            r.three_circles.is_finite() && r.three_circles > 0.0,
            "seed {seed}: {}",
            r.three_circles
        );
        assert!(
            r.three_circles <= THREE_CIRCLES_C_CAL,
            "seed {seed}: three circles {} above {THREE_CIRCLES_C_CAL}",
            r.three_circles
        );
        assert!(r.stream_residual <= 1e-3, "seed {seed}: stream residual {}", r.stream_residual);
        assert!(
            r.w_beltrami_defect <= 1e-3,
            "seed {seed}: Beltrami defect of w {}",
            r.w_beltrami_defect
        );
        println!(
            "seed {seed}: three circles {:.3}, stream residual {:.2e}, w defect {:.2e}",
            r.three_circles, r.stream_residual, r.w_beltrami_defect
        );
    }
}
