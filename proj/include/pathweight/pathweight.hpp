#pragma once

// Finite-dimensional approximation of Wiener measure on non-positively
// curved manifolds: piecewise-geodesic path spaces, Jacobi-field Gram
// matrices, the flat-spectrum analysis, the Radon-Nikodym density, and
// reproducible Monte Carlo convergence studies.

#include "pathweight/rng.hpp"
#include "pathweight/partition.hpp"
#include "pathweight/curvature.hpp"
#include "pathweight/development.hpp"
#include "pathweight/jacobi.hpp"
#include "pathweight/quadrature.hpp"
#include "pathweight/block_tridiagonal.hpp"
#include "pathweight/gram.hpp"
#include "pathweight/spectral.hpp"
#include "pathweight/density.hpp"
#include "pathweight/montecarlo.hpp"
