#ifndef MARKOVLM_MARKOVLM_HPP
#define MARKOVLM_MARKOVLM_HPP

#include "markovlm/asymptotics.hpp"
#include "markovlm/dag.hpp"
#include "markovlm/dataset.hpp"
#include "markovlm/error.hpp"
#include "markovlm/estimators.hpp"
#include "markovlm/io/csv.hpp"
#include "markovlm/io/discretize.hpp"
#include "markovlm/io/model_file.hpp"
#include "markovlm/io/report.hpp"
#include "markovlm/kernel.hpp"
#include "markovlm/matrix.hpp"
#include "markovlm/normal.hpp"
#include "markovlm/oracle.hpp"
#include "markovlm/quality.hpp"
#include "markovlm/rng.hpp"
#include "markovlm/simulation.hpp"

#endif  // MARKOVLM_MARKOVLM_HPP
