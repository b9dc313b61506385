#ifndef STSGG_STSGG_HPP
#define STSGG_STSGG_HPP

#include "benchmark.hpp"
#include "catm.hpp"
#include "checkpoint.hpp"
#include "classifier.hpp"
#include "dataset_io.hpp"
#include "errors.hpp"
#include "evaluate.hpp"
#include "gsl.hpp"
#include "label_space.hpp"
#include "metrics.hpp"
#include "reports.hpp"
#include "rng.hpp"
#include "selftrain.hpp"
#include "synthgen.hpp"

#endif // STSGG_STSGG_HPP
