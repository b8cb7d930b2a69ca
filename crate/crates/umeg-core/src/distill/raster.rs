//! Raster rendering of keypoint clips: each detected keypoint splats a
//! fixed-sigma Gaussian into its entity channel (persons, ball, court).
//! A desk-scale stand-in for RGB video that keeps the student strictly
//! raster-input.

use crate::data::KeypointClip;

pub const RASTER_CHANNELS: usize = 3;
const SPLAT_SIGMA: f64 = 1.5;
const SPLAT_RADIUS: i64 = 5;

/// A rendered clip: row-major (frame, channel, y, x) pixels in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RasterClip {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl RasterClip {
    pub fn frame(&self, t: usize) -> &[f64] {
        let stride = RASTER_CHANNELS * self.height * self.width;
        &self.data[t * stride..(t + 1) * stride]
    }

    pub fn pixel(&self, t: usize, channel: usize, y: usize, x: usize) -> f64 {
        self.data[((t * RASTER_CHANNELS + channel) * self.height + y) * self.width + x]
    }
}

fn channel_of_node(clip: &KeypointClip, node: usize) -> usize {
    let persons_end = clip.layout.num_persons * clip.layout.joints_per_person;
    if node < persons_end {
        0
    } else if clip.layout.has_ball && node == persons_end {
        1
    } else {
        2
    }
}

fn splat(frame: &mut [f64], height: usize, width: usize, channel: usize, x: f64, y: f64) {
    let cx = x * width as f64;
    let cy = y * height as f64;
    let px = cx.round() as i64;
    let py = cy.round() as i64;
    let inv_two_sigma_sq = 1.0 / (2.0 * SPLAT_SIGMA * SPLAT_SIGMA);
    for row in (py - SPLAT_RADIUS)..=(py + SPLAT_RADIUS) {
        if row < 0 || row >= height as i64 {
            continue;
        }
        for col in (px - SPLAT_RADIUS)..=(px + SPLAT_RADIUS) {
            if col < 0 || col >= width as i64 {
                continue;
            }
            let dy = row as f64 - cy;
            let dx = col as f64 - cx;
            let value = (-(dx * dx + dy * dy) * inv_two_sigma_sq).exp();
            let idx = (channel * height + row as usize) * width + col as usize;
            frame[idx] = (frame[idx] + value).min(1.0);
        }
    }
}

/// Renders selected frames of a clip. Undetected keypoints splat nothing.
pub fn render_frames(
    clip: &KeypointClip,
    frames: &[usize],
    height: usize,
    width: usize,
) -> RasterClip {
    let stride = RASTER_CHANNELS * height * width;
    let mut data = vec![0.0; frames.len() * stride];
    for (i, &t) in frames.iter().enumerate() {
        if t >= clip.frames.len() {
            continue; // Padded window position: stays blank.
        }
        let frame_pixels = &mut data[i * stride..(i + 1) * stride];
        let frame = &clip.frames[t];
        for (node, (&xy, &detected)) in frame.coords.iter().zip(&frame.detected).enumerate() {
            if detected {
                splat(
                    frame_pixels,
                    height,
                    width,
                    channel_of_node(clip, node),
                    xy[0],
                    xy[1],
                );
            }
        }
    }
    RasterClip {
        frames: frames.len(),
        height,
        width,
        data,
    }
}

/// Renders a whole clip deterministically.
pub fn render_raster(clip: &KeypointClip, height: usize, width: usize) -> RasterClip {
    let all: Vec<usize> = (0..clip.frames.len()).collect();
    render_frames(clip, &all, height, width)
}
