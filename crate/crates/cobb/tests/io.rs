use cobb::io::{decode_image, encode_png, load_image, save_accumulator, save_edges, save_image, ImageError};
use cobb_core::{hough_accumulate, EdgeMap, GrayImage, HoughConfig};
use proptest::prelude::*;

fn png(color: image::ExtendedColorType, w: u32, h: u32, data: &[u8]) -> Vec<u8> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out).write_image(data, w, h, color).unwrap();
    out
}

#[test]
fn pgm_bytes_map_to_unit_range() {
    let img = decode_image(b"P5\n2 2\n255\n\x00\xff\x80\x40").unwrap();
    assert_eq!((img.width(), img.height()), (2, 2));
    assert_eq!(img.pixels(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
}

#[test]
fn white_png_pixel_is_one() {
    let img = decode_image(&png(image::ExtendedColorType::L8, 1, 1, &[255])).unwrap();
    assert_eq!(img.pixels(), &[1.0]);
}

#[test]
fn color_png_is_channel_averaged() {
    let img = decode_image(&png(image::ExtendedColorType::Rgb8, 2, 1, &[30, 60, 90, 255, 0, 0])).unwrap();
    assert_eq!(img.pixels(), &[60.0 / 255.0, 85.0 / 255.0]);
}

#[test]
fn truncated_header_is_unreadable() {
    assert!(matches!(decode_image(b"P5\n2"), Err(ImageError::Unreadable(_))));
    assert!(matches!(decode_image(b""), Err(ImageError::Unreadable(_))));
    assert!(matches!(decode_image(b"GIF89a"), Err(ImageError::Unreadable(_))));
}

#[test]
fn sixteen_bit_input_is_rejected() {
    let err = decode_image(b"P5\n1 1\n65535\n\x12\x34").unwrap_err();
    assert!(matches!(err, ImageError::UnsupportedDepth(_)), "{err}");
    let err = decode_image(&png(image::ExtendedColorType::L16, 1, 1, &[0x12, 0x34])).unwrap_err();
    assert!(matches!(err, ImageError::UnsupportedDepth(_)), "{err}");
}

#[test]
fn zero_dimension_is_an_error() {
    assert!(decode_image(b"P5\n0 3\n255\n").is_err());
}

#[test]
fn missing_file_is_unreadable() {
    assert!(matches!(load_image("/nonexistent/x.png"), Err(ImageError::Unreadable(_))));
}

#[test]
fn unknown_extension_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let img = GrayImage::constant(2, 2, 0.5).unwrap();
    assert!(matches!(save_image(&img, dir.path().join("a.jpg")), Err(ImageError::UnsupportedOutput(_))));
}

#[test]
fn debug_dumps_have_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let edges = EdgeMap::from_points(20, 10, (2..18).map(|x| (x, 5)));
    save_edges(&edges, dir.path().join("e.pgm")).unwrap();
    let back = load_image(dir.path().join("e.pgm")).unwrap();
    assert_eq!((back.width(), back.height()), (20, 10));
    assert_eq!(back.get(5, 5), 1.0);
    assert_eq!(back.get(5, 4), 0.0);

    let acc = hough_accumulate(&edges, &HoughConfig::default()).unwrap();
    save_accumulator(&acc, dir.path().join("h.png")).unwrap();
    let heat = load_image(dir.path().join("h.png")).unwrap();
    assert_eq!((heat.width(), heat.height()), (acc.rho_bins(), acc.theta_bins()));
    assert_eq!(heat.pixels().iter().cloned().fold(0.0, f64::max), 1.0);
}

fn image() -> impl Strategy<Value = GrayImage> {
    (1usize..20, 1usize..20).prop_flat_map(|(w, h)| {
        prop::collection::vec(0.0f64..=1.0, w * h).prop_map(move |p| GrayImage::new(w, h, p).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_quantizes_to_eight_bits(img in image(), pgm in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(if pgm { "x.pgm" } else { "x.png" });
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        let expected = img.map(|v| (v * 255.0).round() / 255.0);
        prop_assert_eq!(back, expected);
    }

    #[test]
    fn png_encoding_decodes_back(img in image()) {
        prop_assert_eq!(decode_image(&encode_png(&img)).unwrap(), img.map(|v| (v * 255.0).round() / 255.0));
    }
}
