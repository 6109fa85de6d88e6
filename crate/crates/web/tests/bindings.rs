use tnkf_web::{row_compression, sinc_fit, spiral_spectra};

#[test]
fn sinc_fit_tracks_the_curve_and_brackets_it() {
    let fit = sinc_fit(8, 0.1, 1, 1.0, 0.2, 5e-4).unwrap();
    assert_eq!(fit.x().len(), 256);
    assert_eq!(fit.grid().len(), fit.mean().len());
    assert!(fit.rmse() < 0.06, "rmse {}", fit.rmse());
    let (lo, hi, mean) = (fit.lower(), fit.upper(), fit.mean());
    assert!((0..mean.len()).all(|i| lo[i] <= mean[i] && mean[i] <= hi[i]));
}

#[test]
fn sinc_fit_rejects_bad_sizes() {
    assert!(sinc_fit(0, 0.1, 1, 10.0, 0.05, 0.0).is_err());
    assert!(sinc_fit(11, 0.1, 1, 10.0, 0.05, 0.0).is_err());
    assert!(sinc_fit(4, 0.1, 1, 10.0, -1.0, 0.0).is_err());
}

#[test]
fn compressed_row_meets_tolerance_and_saves_storage() {
    let r = row_compression(10, 0.05, 300, 1e-3).unwrap();
    assert_eq!(r.dense().len(), 1024);
    assert!(r.rel_error() <= 1e-3);
    assert!(r.storage() < 1024);
    assert_eq!(*r.ranks().first().unwrap(), 1);
    assert_eq!(*r.ranks().last().unwrap(), 1);
}

#[test]
fn spiral_spectra_counts_grow() {
    let s = spiral_spectra(&[64, 128], 5e-8, 2.4e-3, 1e-3).unwrap();
    assert_eq!(s.values().len(), 192);
    let c = s.counts();
    assert!(c[0] < c[1], "{c:?}");
    assert!(spiral_spectra(&[4096], 5e-8, 1.0, 1e-3).is_err());
}
