//! Deterministic fixtures shared by the criterion benches: a gradient-shaded
//! cube room observed by a handful of cameras, all analytic (no RNG), so
//! repeated runs measure the same work.

use illumkit_core::ibr::Observation;
use illumkit_core::synth::{camera_looking_at, render_camera, render_panorama, BoxRoom, Shading};
use illumkit_core::{Locale, PanoramaImage};
use nalgebra::Vector3;

pub fn gradient_room() -> BoxRoom {
    BoxRoom::cube(
        2.5,
        Shading::Gradient([
            [0.9, 0.2, 0.2],
            [0.2, 0.9, 0.2],
            [0.2, 0.2, 0.9],
            [0.8, 0.8, 0.1],
            [0.3, 0.3, 0.3],
            [1.4, 1.4, 1.2],
        ]),
    )
}

/// Cameras near the room center aimed at wall interiors, mirroring how real
/// captures look at the scene from inside.
pub fn room_observations(width: usize, height: usize) -> (Locale, Vec<Observation>) {
    let room = gradient_room();
    let locale = Locale::canonical();
    let shots = [
        (Vector3::new(2.5, 0.2, 0.0), Vector3::new(-0.5, 0.0, 0.1)),
        (Vector3::new(-2.5, -0.3, 0.1), Vector3::new(0.5, 0.1, 0.0)),
        (Vector3::new(0.3, 2.5, -0.2), Vector3::new(0.0, -0.5, -0.1)),
    ];
    let observations = shots
        .into_iter()
        .map(|(target, position)| {
            let cam = camera_looking_at(
                position,
                target,
                Vector3::z(),
                height as f64,
                width,
                height,
            )
            .unwrap();
            let (hdr, depth) = render_camera(&room, &cam).unwrap();
            Observation { hdr, depth, camera: cam }
        })
        .collect();
    (locale, observations)
}

/// Smooth complete radiance map, the typical diffuse-convolution input.
pub fn room_panorama(height: usize) -> PanoramaImage {
    render_panorama(&gradient_room(), &Locale::canonical(), height).unwrap()
}
