#pragma once

#include "emfim/baselines.hpp"
#include "emfim/em.hpp"
#include "emfim/error.hpp"
#include "emfim/experiment.hpp"
#include "emfim/io.hpp"
#include "emfim/linalg.hpp"
#include "emfim/model.hpp"
#include "emfim/models/gmm.hpp"
#include "emfim/models/ssm.hpp"
#include "emfim/models/synthetic.hpp"
#include "emfim/numdiff.hpp"
#include "emfim/random.hpp"
#include "emfim/report.hpp"
#include "emfim/spsa.hpp"
