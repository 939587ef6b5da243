#pragma once

#include "obsctl/certificate.hpp"
#include "obsctl/error.hpp"
#include "obsctl/fem.hpp"
#include "obsctl/funcexpr.hpp"
#include "obsctl/io.hpp"
#include "obsctl/linalg.hpp"
#include "obsctl/mesh.hpp"
#include "obsctl/penalized.hpp"
#include "obsctl/problem.hpp"
#include "obsctl/sparse_matrix.hpp"
#include "obsctl/vi.hpp"
