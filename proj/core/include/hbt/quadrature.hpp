#pragma once

#include <vector>

namespace hbt {

struct quadrature_rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Nodes and weights on [-1, 1].
quadrature_rule gauss_legendre(int n);

// Physicists' weight e^{-x^2} on the real line.
quadrature_rule gauss_hermite(int n);

// Gauss-Legendre rule mapped onto [a, b].
quadrature_rule gauss_legendre(int n, double a, double b);

// Composite rule: `panels` equal panels of an n-point Gauss-Legendre rule.
quadrature_rule composite_gauss_legendre(int n, int panels, double a, double b);

}  // namespace hbt
