// SPDX-License-Identifier: Apache-2.0

//! Host cpu/memory profiles, as carried in `log/hostResources` messages.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CpuProfile {
    pub cores: u32,
    /// MHz.
    pub frequency: f64,
    pub utilization: f64,
    pub utilization_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MemoryProfile {
    /// Bytes.
    pub maximum: u64,
    pub utilization: f64,
    pub utilization_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostProfile {
    pub cpu: CpuProfile,
    pub memory: MemoryProfile,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("cpu cores must be at least 1")]
    NoCores,
    #[error("cpu frequency must be positive, got {0}")]
    Frequency(f64),
    #[error("{field} = {value} is outside [0, 1]")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("{field} utilization {utilization} exceeds its peak {peak}")]
    AbovePeak { field: &'static str, utilization: f64, peak: f64 },
}

impl HostProfile {
    pub fn new(cores: u32, frequency_mhz: f64, cpu_utilization: f64, memory_bytes: u64, memory_utilization: f64) -> Self {
        HostProfile {
            cpu: CpuProfile {
                cores,
                frequency: frequency_mhz,
                utilization: cpu_utilization,
                utilization_peak: cpu_utilization,
            },
            memory: MemoryProfile {
                maximum: memory_bytes,
                utilization: memory_utilization,
                utilization_peak: memory_utilization,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.cpu.cores < 1 {
            return Err(ProfileError::NoCores);
        }
        if !(self.cpu.frequency > 0.0) {
            return Err(ProfileError::Frequency(self.cpu.frequency));
        }
        for (field, value) in [
            ("cpu.utilization", self.cpu.utilization),
            ("cpu.utilizationPeak", self.cpu.utilization_peak),
            ("memory.utilization", self.memory.utilization),
            ("memory.utilizationPeak", self.memory.utilization_peak),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ProfileError::OutOfRange { field, value });
            }
        }
        if self.cpu.utilization > self.cpu.utilization_peak {
            return Err(ProfileError::AbovePeak {
                field: "cpu",
                utilization: self.cpu.utilization,
                peak: self.cpu.utilization_peak,
            });
        }
        if self.memory.utilization > self.memory.utilization_peak {
            return Err(ProfileError::AbovePeak {
                field: "memory",
                utilization: self.memory.utilization,
                peak: self.memory.utilization_peak,
            });
        }
        Ok(())
    }

    /// Clamps utilizations into `[0, 1]` and raises peaks to cover them.
    pub fn clamped(mut self) -> Self {
        let clamp = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        self.cpu.utilization = clamp(self.cpu.utilization);
        self.cpu.utilization_peak = clamp(self.cpu.utilization_peak).max(self.cpu.utilization);
        self.memory.utilization = clamp(self.memory.utilization);
        self.memory.utilization_peak = clamp(self.memory.utilization_peak).max(self.memory.utilization);
        self.cpu.cores = self.cpu.cores.max(1);
        self
    }

    /// The profile logged in the documented `hostResources` example.
    pub fn reference() -> Self {
        HostProfile {
            cpu: CpuProfile {
                cores: 8,
                frequency: 2400.0,
                utilization: 0.052,
                utilization_peak: 1.0,
            },
            memory: MemoryProfile {
                maximum: 17_179_869_184,
                utilization: 0.075,
                utilization_peak: 1.0,
            },
        }
    }
}

/// Reads cpu and memory figures from `/proc`. Off Linux, or when a file is
/// unreadable, falls back to the last known values.
#[derive(Debug)]
pub struct HostSampler {
    last_cpu_ticks: Option<(u64, u64)>,
    current: HostProfile,
}

impl Default for HostSampler {
    fn default() -> Self {
        Self::new()
    }
}

impl HostSampler {
    pub fn new() -> Self {
        let cores = std::thread::available_parallelism().map(|n| n.get() as u32).unwrap_or(1);
        let mut sampler = HostSampler {
            last_cpu_ticks: None,
            current: HostProfile::new(cores, 1000.0, 0.0, 1 << 30, 0.0),
        };
        sampler.sample();
        sampler
    }

    pub fn sample(&mut self) -> HostProfile {
        if let Ok(info) = std::fs::read_to_string("/proc/cpuinfo") {
            let mhz: Vec<f64> = info
                .lines()
                .filter(|l| l.starts_with("cpu MHz"))
                .filter_map(|l| l.split(':').nth(1)?.trim().parse().ok())
                .collect();
            if !mhz.is_empty() {
                self.current.cpu.frequency = mhz.iter().sum::<f64>() / mhz.len() as f64;
            }
        }
        if let Some((busy, total)) = read_cpu_ticks() {
            if let Some((prev_busy, prev_total)) = self.last_cpu_ticks {
                let dt = total.saturating_sub(prev_total);
                if dt > 0 {
                    self.current.cpu.utilization = busy.saturating_sub(prev_busy) as f64 / dt as f64;
                }
            }
            self.last_cpu_ticks = Some((busy, total));
        }
        if let Some((total, available)) = read_meminfo() {
            self.current.memory.maximum = total;
            if total > 0 {
                self.current.memory.utilization = 1.0 - available as f64 / total as f64;
            }
        }
        self.current.cpu.utilization_peak = self.current.cpu.utilization_peak.max(self.current.cpu.utilization);
        self.current.memory.utilization_peak = self.current.memory.utilization_peak.max(self.current.memory.utilization);
        self.current = self.current.clone().clamped();
        self.current.clone()
    }
}

fn read_cpu_ticks() -> Option<(u64, u64)> {
    let stat = std::fs::read_to_string("/proc/stat").ok()?;
    let line = stat.lines().find(|l| l.starts_with("cpu "))?;
    let ticks: Vec<u64> = line.split_whitespace().skip(1).filter_map(|t| t.parse().ok()).collect();
    if ticks.len() < 4 {
        return None;
    }
    let total: u64 = ticks.iter().sum();
    let idle = ticks[3] + ticks.get(4).copied().unwrap_or(0);
    Some((total - idle, total))
}

fn read_meminfo() -> Option<(u64, u64)> {
    let info = std::fs::read_to_string("/proc/meminfo").ok()?;
    let field = |name: &str| -> Option<u64> {
        let line = info.lines().find(|l| l.starts_with(name))?;
        let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
        Some(kb * 1024)
    };
    Some((field("MemTotal:")?, field("MemAvailable:")?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_profile_is_valid() {
        HostProfile::reference().validate().unwrap();
    }

    #[test]
    fn out_of_range_utilization_is_rejected() {
        let mut p = HostProfile::reference();
        p.cpu.utilization = 1.5;
        assert!(matches!(p.validate(), Err(ProfileError::OutOfRange { .. })));
        let c = p.clamped();
        assert_eq!(c.cpu.utilization, 1.0);
        c.validate().unwrap();
    }

    #[test]
    fn utilization_above_peak_is_rejected() {
        let mut p = HostProfile::reference();
        p.memory.utilization_peak = 0.01;
        assert!(matches!(p.validate(), Err(ProfileError::AbovePeak { .. })));
    }

    #[test]
    fn sampler_values_stay_in_bounds() {
        let mut s = HostSampler::new();
        for _ in 0..3 {
            s.sample().validate().unwrap();
        }
    }
}
