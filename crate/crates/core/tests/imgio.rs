use ispbench::imgio::{
    load_ppm, load_raw_planar, quantize, save_ppm, save_raw_bayer, save_raw_planar, ImgIoError, RawImage, RawPlanes,
};
use ispbench::synth::{synth_bayer, SynthKind};
use ispbench::PlanarImage;

fn gradient(w: usize, h: usize) -> PlanarImage {
    let px: Vec<[f32; 3]> = (0..w * h)
        .map(|i| {
            let t = i as f32 / (w * h) as f32;
            [t, 1.0 - t, 0.5]
        })
        .collect();
    PlanarImage::from_pixels(w, h, &px).unwrap()
}

#[test]
fn ppm_file_round_trips_at_eight_bits() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.ppm");
    let img = gradient(7, 5);
    save_ppm(&img, &path).unwrap();
    let back = load_ppm(&path).unwrap();
    assert_eq!(back, img.map(quantize));
    // a second trip is lossless
    save_ppm(&back, &path).unwrap();
    assert_eq!(load_ppm(&path).unwrap(), back);
}

#[test]
fn raw_files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let bayer = synth_bayer(6, 4, SynthKind::SeededNoise(1)).unwrap();
    let p = dir.path().join("b.raw");
    save_raw_bayer(&bayer, &p).unwrap();
    assert_eq!(load_raw_planar(&p, 6, 4, RawPlanes::Bayer).unwrap(), RawImage::Bayer(bayer));

    let rgb = gradient(3, 3);
    let p = dir.path().join("c.raw");
    save_raw_planar(&rgb, &p).unwrap();
    assert_eq!(load_raw_planar(&p, 3, 3, RawPlanes::Rgb).unwrap(), RawImage::Rgb(rgb));
    assert!(matches!(
        load_raw_planar(&p, 3, 4, RawPlanes::Rgb),
        Err(ImgIoError::RawLength { expected: 144, actual: 108 })
    ));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_ppm(dir.path().join("nope.ppm")).unwrap_err();
    assert!(err.to_string().contains("nope.ppm"), "{err}");
}
