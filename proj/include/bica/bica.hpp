#pragma once

#include "bica/binary_matrix.hpp"
#include "bica/errors.hpp"
#include "bica/experiment.hpp"
#include "bica/infer.hpp"
#include "bica/inverse.hpp"
#include "bica/metrics.hpp"
#include "bica/mixture.hpp"
#include "bica/oracle.hpp"
#include "bica/radio.hpp"
#include "bica/rng.hpp"
#include "bica/serialize.hpp"
