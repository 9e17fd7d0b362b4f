// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>

#include "eqscene/core/error.hpp"

namespace eqscene::warp {

/// Coordinate convention an affine map is expressed in.
///
/// pixel: x grows rightward and y grows downward, pixel (col, row) has its
///   center at (col, row). The top-left pixel center is the origin.
/// normalized: both axes span [-1, 1] across the canvas; pixel centers sit at
///   -1 + (2k + 1) / W (align-corners = false).
enum class CoordFrame { pixel, normalized };

std::string to_string(CoordFrame f);

class SingularTransformError : public ContractError {
 public:
  using ContractError::ContractError;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// 2x3 affine map p -> [a11 a12; a21 a22] p + [tx; ty].
struct AffineParams {
  double a11 = 1.0, a12 = 0.0, tx = 0.0;
  double a21 = 0.0, a22 = 1.0, ty = 0.0;
  CoordFrame frame = CoordFrame::pixel;

  static AffineParams identity(CoordFrame frame = CoordFrame::pixel) {
    AffineParams a;
    a.frame = frame;
    return a;
  }

  /// Row-major (a11, a12, tx, a21, a22, ty), the layout of PyTorch's theta.
  std::array<double, 6> coefficients() const { return {a11, a12, tx, a21, a22, ty}; }
  static AffineParams from_coefficients(const std::array<double, 6>& c, CoordFrame frame);

  Point apply(Point p) const { return {a11 * p.x + a12 * p.y + tx, a21 * p.x + a22 * p.y + ty}; }
  double determinant() const { return a11 * a22 - a12 * a21; }

  bool operator==(const AffineParams&) const = default;
};

/// Rotation by `degrees` about `center`, using the matrix [[c, -s], [s, c]].
/// In the y-down pixel frame a positive angle turns clockwise on screen; the
/// dataset generator flips the sign to get on-screen counterclockwise motion
/// (see datagen::screen_rotation).
AffineParams make_rotation(double degrees, Point center = {}, CoordFrame frame = CoordFrame::pixel);

AffineParams make_translation(double dx, double dy, CoordFrame frame = CoordFrame::pixel);

/// p -> outer(inner(p)). Throws ContractError on frame mismatch.
AffineParams compose(const AffineParams& outer, const AffineParams& inner);

/// Throws SingularTransformError when |det| < 1e-9.
AffineParams invert(const AffineParams& a);

/// Re-expresses a pixel-frame map over [-1, 1]^2 coordinates of a width x height canvas.
AffineParams pixel_to_normalized(const AffineParams& a, int width, int height);
AffineParams normalized_to_pixel(const AffineParams& a, int width, int height);

/// Maximum absolute coefficient difference; frames must match.
double max_abs_diff(const AffineParams& a, const AffineParams& b);

}  // namespace eqscene::warp
