use criterion::{black_box, criterion_group, criterion_main, Criterion};
use illumkit_bench::{room_observations, room_panorama};
use illumkit_core::ibr::{build_distance_map, render_illumination};
use illumkit_core::metrics::eval_illum;
use illumkit_core::shading::diffuse_convolve;
use illumkit_core::warp::{forward_warp, WarpRequest, WarpTarget};
use illumkit_core::{GeometryMap, PanoKind};

fn pixel_mapping(c: &mut Criterion) {
    let pano = room_panorama(160);
    c.bench_function("pixel_mapping_roundtrip_160", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for v in 0..pano.height() {
                for u in 0..pano.width() {
                    let d = pano.pixel_to_direction(u, v).unwrap();
                    let (uc, vc) = pano.direction_to_pixel(&d).unwrap();
                    acc += uc + vc;
                }
            }
            black_box(acc)
        })
    });
}

fn warp(c: &mut Criterion) {
    let (locale, observations) = room_observations(192, 144);
    let obs = &observations[0];
    let geometry = GeometryMap::from_depth(&obs.depth, &obs.camera).unwrap();
    c.bench_function("forward_warp_192x144_to_160", |b| {
        b.iter(|| {
            forward_warp(&WarpRequest {
                image: &obs.hdr,
                geometry: &geometry,
                camera: &obs.camera,
                target: WarpTarget::Locale(locale.clone()),
                kind: PanoKind::HdrRadiance,
                pano_height: 160,
            })
            .unwrap()
        })
    });
}

fn ibr(c: &mut Criterion) {
    let (locale, observations) = room_observations(96, 72);
    let dist = build_distance_map(&observations, &locale, 64).unwrap();
    c.bench_function("render_illumination_3x96x72_to_64", |b| {
        b.iter(|| render_illumination(&observations, &locale, black_box(&dist)).unwrap())
    });
}

fn diffuse(c: &mut Criterion) {
    let pano = room_panorama(160);
    c.bench_function("diffuse_convolve_160_work_40", |b| {
        b.iter(|| diffuse_convolve(black_box(&pano), 40).unwrap())
    });
}

fn eval(c: &mut Criterion) {
    let gt = room_panorama(64);
    let pred = gt.roll_columns_left(17);
    c.bench_function("eval_illum_aligned_64", |b| {
        b.iter(|| eval_illum(black_box(&pred), black_box(&gt), true).unwrap())
    });
}

fn config() -> Criterion {
    Criterion::default().sample_size(10)
}

criterion_group! {
    name = benches;
    config = config();
    targets = pixel_mapping, warp, ibr, diffuse, eval
}
criterion_main!(benches);
