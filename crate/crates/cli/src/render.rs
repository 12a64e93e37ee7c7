use motok_core::skeleton::{NUM_JOINTS, PARENTS};
use motok_core::MotionSequence;

use crate::CliError;

const FIGURE_WIDTH: f64 = 120.0;
const FIGURE_HEIGHT: f64 = 220.0;
const SCALE: f64 = 100.0; // pixels per meter

/// Renders every `stride`-th frame as a stick figure, laid out horizontally
/// in one SVG. Output bytes are a pure function of the input.
pub fn render_svg(m: &MotionSequence, stride: usize) -> Result<String, CliError> {
    if stride == 0 {
        return Err(CliError::BadArgument("stride must be >= 1".into()));
    }
    let frames: Vec<usize> = (0..m.num_frames()).step_by(stride).collect();
    let width = FIGURE_WIDTH * frames.len() as f64;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{FIGURE_HEIGHT:.0}\" \
         viewBox=\"0 0 {width:.0} {FIGURE_HEIGHT:.0}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{width:.0}\" height=\"{FIGURE_HEIGHT:.0}\" fill=\"white\"/>\n"
    ));
    for (i, &t) in frames.iter().enumerate() {
        // Project onto the x–z plane, centered on the pelvis.
        let root = m.joint_position(t, 0);
        let px = |p: [f64; 3]| -> (f64, f64) {
            (
                i as f64 * FIGURE_WIDTH + FIGURE_WIDTH / 2.0 + (p[0] - root[0]) * SCALE,
                FIGURE_HEIGHT - 10.0 - p[2] * SCALE,
            )
        };
        for j in 1..NUM_JOINTS {
            let (x1, y1) = px(m.joint_position(t, PARENTS[j]));
            let (x2, y2) = px(m.joint_position(t, j));
            svg.push_str(&format!(
                "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" \
                 stroke=\"black\" stroke-width=\"1.5\"/>\n"
            ));
        }
        for j in 0..NUM_JOINTS {
            let (cx, cy) = px(m.joint_position(t, j));
            svg.push_str(&format!(
                "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"2\" fill=\"black\"/>\n"
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rest(t_len: usize) -> MotionSequence {
        let frame = MotionSequence::rest_frame();
        let mut frames = Vec::new();
        for _ in 0..t_len {
            frames.extend_from_slice(&frame);
        }
        MotionSequence::new(frames, t_len, 20.0).unwrap()
    }

    #[test]
    fn one_frame_motion_renders_one_figure() {
        let svg = render_svg(&rest(1), 1).unwrap();
        assert_eq!(svg.matches("<circle").count(), NUM_JOINTS);
        assert_eq!(svg.matches("<line").count(), NUM_JOINTS - 1);
    }

    #[test]
    fn stride_ten_over_hundred_frames_gives_ten_figures() {
        let svg = render_svg(&rest(100), 10).unwrap();
        assert_eq!(svg.matches("<circle").count(), 10 * NUM_JOINTS);
    }

    #[test]
    fn output_is_deterministic() {
        let m = rest(7);
        assert_eq!(render_svg(&m, 2).unwrap(), render_svg(&m, 2).unwrap());
    }

    #[test]
    fn zero_stride_is_rejected() {
        assert!(render_svg(&rest(3), 0).is_err());
    }
}
