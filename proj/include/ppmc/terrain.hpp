#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace ppmc {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct TerrainSpec {
  std::uint64_t seed = 0;
  double amplitude = 0.0;   // meters, first-octave amplitude
  double wavelength = 1.0;  // meters, first-octave wavelength
  int octaves = 1;
  double extent = 15.0;     // half-width of the square map

  friend bool operator==(const TerrainSpec&, const TerrainSpec&) = default;
};

enum class MapId { kTraining = 1, kFlatter = 2, kBumpier = 3 };

// Shipped presets for the three evaluation maps.
TerrainSpec terrain_preset(MapId id);
TerrainSpec terrain_preset(int id);
TerrainSpec flat_terrain(double extent = 15.0);

// Analytic heightfield: a sum of seeded 2-D sinusoid octaves (amplitude
// halves and frequency doubles per octave), multiplied by a smooth radial
// window that is zero with zero gradient at the origin and one beyond
// kSpawnRadius.
class HeightField {
 public:
  static constexpr double kSpawnRadius = 1.0;
  static constexpr int kWavesPerOctave = 2;

  explicit HeightField(const TerrainSpec& spec);

  const TerrainSpec& spec() const { return spec_; }

  double height_at(double x, double y) const;
  // (dh/dx, dh/dy)
  std::array<double, 2> gradient_at(double x, double y) const;
  Vec3 normal_at(double x, double y) const;

  // Upper bound on |h| (sum of octave amplitudes).
  double amplitude_bound() const;
  // Upper bound on |grad h| of the unwindowed sum (sum of 2*pi*a/lambda).
  double slope_bound() const;

  bool is_flat() const { return waves_.empty(); }

 private:
  struct Wave {
    double amplitude;
    double kx;  // wavenumber components, rad/m
    double ky;
    double phase;
  };

  // Sum of waves and its gradient, without the spawn window.
  double raw_height(double x, double y, double* gx, double* gy) const;

  TerrainSpec spec_;
  std::vector<Wave> waves_;
};

HeightField build_height_field(const TerrainSpec& spec);

// Writes `x,y,h` rows on a regular grid covering [-extent, extent]^2.
void dump_heightmap_csv(const HeightField& field, double spacing, std::ostream& out);

}  // namespace ppmc
