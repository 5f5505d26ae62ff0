//! Plot-ready column files: whitespace-separated, one header line, one row per record.

use std::io::Write;

use omniteleop_core::geom::Rotation;
use omniteleop_core::StepRecord;

use crate::log::LogHeader;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Normalized time, reference pose and twist, feedback wrench.
    Decoupling,
    /// Time, vehicle position, contact wrench, interaction feedback.
    PushSlide,
}

impl PlotKind {
    pub fn for_log(header: &LogHeader) -> Self {
        match header.kind.as_str() {
            "push_slide" => PlotKind::PushSlide,
            _ => PlotKind::Decoupling,
        }
    }

    pub fn columns(self) -> Vec<&'static str> {
        match self {
            PlotKind::Decoupling => vec![
                "tn", "p_ref_x", "p_ref_y", "p_ref_z", "r_ref_x", "r_ref_y", "r_ref_z", "v_ref_x", "v_ref_y",
                "v_ref_z", "w_ref_x", "w_ref_y", "w_ref_z", "w_fb_fx", "w_fb_fy", "w_fb_fz", "w_fb_tx", "w_fb_ty",
                "w_fb_tz",
            ],
            PlotKind::PushSlide => vec![
                "t", "p_s_x", "p_s_y", "p_s_z", "f_k_x", "f_k_y", "f_k_z", "tau_k_x", "tau_k_y", "tau_k_z", "w_int_fx",
                "w_int_fy", "w_int_fz", "w_int_tx", "w_int_ty", "w_int_tz",
            ],
        }
    }

    fn row(self, header: &LogHeader, r: &StepRecord) -> Vec<f64> {
        match self {
            PlotKind::Decoupling => {
                let mut row = vec![r.t / header.duration];
                row.extend(r.p_ref);
                let q = Rotation::try_from_wxyz(r.q_ref[0], r.q_ref[1], r.q_ref[2], r.q_ref[3])
                    .map(|q| q.axis_angle())
                    .unwrap_or_default();
                row.extend(q.iter());
                row.extend(r.v_ref);
                row.extend(r.w_ref);
                row.extend(r.w_fb);
                row
            }
            PlotKind::PushSlide => {
                let mut row = vec![r.t];
                row.extend(r.p_s);
                row.extend(r.f_k);
                row.extend(r.tau_k);
                row.extend(r.w_int);
                row
            }
        }
    }
}

pub fn write_plot(
    mut out: impl Write,
    kind: PlotKind,
    header: &LogHeader,
    records: &[StepRecord],
) -> std::io::Result<()> {
    writeln!(out, "{}", kind.columns().join(" "))?;
    for r in records {
        let row = kind.row(header, r);
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", cells.join(" "))?;
    }
    out.flush()
}
