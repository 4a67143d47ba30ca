#include "ppmc/terrain.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace ppmc {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// mt19937_64 output is fully specified by the standard, unlike the
// distribution adaptors, so unit draws are built from raw bits.
double unit_draw(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

void require_finite(double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y)) {
    throw std::invalid_argument("terrain query coordinates must be finite");
  }
}

}  // namespace

TerrainSpec terrain_preset(MapId id) {
  switch (id) {
    case MapId::kTraining:
      return TerrainSpec{.seed = 1, .amplitude = 0.20, .wavelength = 2.5, .octaves = 3, .extent = 15.0};
    case MapId::kFlatter:
      return TerrainSpec{.seed = 2, .amplitude = 0.10, .wavelength = 4.0, .octaves = 2, .extent = 15.0};
    case MapId::kBumpier:
      return TerrainSpec{.seed = 3, .amplitude = 0.30, .wavelength = 1.8, .octaves = 4, .extent = 15.0};
  }
  throw std::invalid_argument("unknown map id");
}

TerrainSpec terrain_preset(int id) {
  if (id < 1 || id > 3) {
    throw std::invalid_argument("unknown map id " + std::to_string(id) + " (expected 1, 2 or 3)");
  }
  return terrain_preset(static_cast<MapId>(id));
}

TerrainSpec flat_terrain(double extent) {
  return TerrainSpec{.seed = 0, .amplitude = 0.0, .wavelength = 1.0, .octaves = 1, .extent = extent};
}

HeightField::HeightField(const TerrainSpec& spec) : spec_(spec) {
  if (!(spec.wavelength > 0.0)) throw std::invalid_argument("terrain wavelength must be > 0");
  if (spec.octaves < 1) throw std::invalid_argument("terrain octaves must be >= 1");
  if (!(spec.extent > 0.0)) throw std::invalid_argument("terrain extent must be > 0");
  if (!(spec.amplitude >= 0.0)) throw std::invalid_argument("terrain amplitude must be >= 0");
  if (spec.amplitude == 0.0) return;

  std::mt19937_64 gen(spec.seed);
  double amplitude = spec.amplitude;
  double wavelength = spec.wavelength;
  for (int k = 0; k < spec.octaves; ++k) {
    const double wavenumber = kTwoPi / wavelength;
    // Two roughly orthogonal plane waves per octave.
    const double heading = kTwoPi * unit_draw(gen);
    for (int j = 0; j < kWavesPerOctave; ++j) {
      const double dir = heading + j * (std::numbers::pi / 2.0) + 0.3 * (unit_draw(gen) - 0.5);
      waves_.push_back(Wave{.amplitude = amplitude / kWavesPerOctave,
                            .kx = wavenumber * std::cos(dir),
                            .ky = wavenumber * std::sin(dir),
                            .phase = kTwoPi * unit_draw(gen)});
    }
    amplitude *= 0.5;
    wavelength *= 0.5;
  }
}

double HeightField::raw_height(double x, double y, double* gx, double* gy) const {
  double h = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  for (const Wave& w : waves_) {
    const double arg = w.kx * x + w.ky * y + w.phase;
    h += w.amplitude * std::sin(arg);
    const double c = w.amplitude * std::cos(arg);
    dx += c * w.kx;
    dy += c * w.ky;
  }
  if (gx) *gx = dx;
  if (gy) *gy = dy;
  return h;
}

double HeightField::height_at(double x, double y) const {
  require_finite(x, y);
  if (waves_.empty()) return 0.0;
  const double q = (x * x + y * y) / (kSpawnRadius * kSpawnRadius);
  const double raw = raw_height(x, y, nullptr, nullptr);
  if (q >= 1.0) return raw;
  return q * q * (3.0 - 2.0 * q) * raw;
}

std::array<double, 2> HeightField::gradient_at(double x, double y) const {
  require_finite(x, y);
  if (waves_.empty()) return {0.0, 0.0};
  double gx = 0.0;
  double gy = 0.0;
  const double raw = raw_height(x, y, &gx, &gy);
  const double q = (x * x + y * y) / (kSpawnRadius * kSpawnRadius);
  if (q >= 1.0) return {gx, gy};
  const double window = q * q * (3.0 - 2.0 * q);
  // d(window)/dq * dq/dx
  const double dwindow = 6.0 * q * (1.0 - q) * 2.0 / (kSpawnRadius * kSpawnRadius);
  return {window * gx + dwindow * x * raw, window * gy + dwindow * y * raw};
}

Vec3 HeightField::normal_at(double x, double y) const {
  const auto [gx, gy] = gradient_at(x, y);
  const double norm = std::sqrt(gx * gx + gy * gy + 1.0);
  return Vec3{-gx / norm, -gy / norm, 1.0 / norm};
}

double HeightField::amplitude_bound() const {
  double total = 0.0;
  for (const Wave& w : waves_) total += w.amplitude;
  return total;
}

double HeightField::slope_bound() const {
  double total = 0.0;
  double amplitude = spec_.amplitude;
  double wavelength = spec_.wavelength;
  if (waves_.empty()) return 0.0;
  for (int k = 0; k < spec_.octaves; ++k) {
    total += kTwoPi * amplitude / wavelength;
    amplitude *= 0.5;
    wavelength *= 0.5;
  }
  return total;
}

HeightField build_height_field(const TerrainSpec& spec) { return HeightField(spec); }

void dump_heightmap_csv(const HeightField& field, double spacing, std::ostream& out) {
  if (!(spacing > 0.0)) throw std::invalid_argument("heightmap spacing must be > 0");
  const double extent = field.spec().extent;
  const int n = static_cast<int>(std::floor(2.0 * extent / spacing + 1e-9)) + 1;
  char buf[96];
  out << "x,y,h\n";
  for (int j = 0; j < n; ++j) {
    const double y = -extent + j * spacing;
    for (int i = 0; i < n; ++i) {
      const double x = -extent + i * spacing;
      std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.6f\n", x, y, field.height_at(x, y));
      out << buf;
    }
  }
}

}  // namespace ppmc
