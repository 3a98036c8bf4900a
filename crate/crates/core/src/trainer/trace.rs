use std::io::Write;

/// Diagnostics of one completed iteration. Loss values are measured on the
/// iteration's own batches before its updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub d_loss_real: f64,
    pub d_loss_fake: f64,
    pub g_objective: f64,
    /// Mean probability mass on the real classes over generated samples.
    pub mean_d_of_g: f64,
    pub g_updated: bool,
}

/// Squared parameter norms after an iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSnapshot {
    pub iteration: usize,
    pub discriminator: f64,
    pub generator: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
    pub norms: Vec<NormSnapshot>,
    /// Probabilities that hit the log floor, summed over the run.
    pub clamp_hits: usize,
}

pub const TRACE_HEADER: &str = "iteration,d_loss_real,d_loss_fake,g_objective,mean_D_of_G,g_updated";

impl TrainingTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn generator_updates(&self) -> usize {
        self.records.iter().filter(|r| r.g_updated).count()
    }

    /// Appends a continuation of this run.
    pub fn extend(&mut self, other: TrainingTrace) {
        self.records.extend(other.records);
        self.norms.extend(other.norms);
        self.clamp_hits += other.clamp_hits;
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iteration, r.d_loss_real, r.d_loss_fake, r.g_objective, r.mean_d_of_g, r.g_updated as u8
            )?;
        }
        Ok(())
    }

    pub fn write_norms_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,norm_sq_discriminator,norm_sq_generator")?;
        for n in &self.norms {
            writeln!(w, "{},{},{}", n.iteration, n.discriminator, n.generator)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}
