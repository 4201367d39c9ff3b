#pragma once

// Location-privacy-preference recommendation under local differential
// privacy: matrix factorization core, LDP mechanisms, simulated federated
// training, the dataset pipeline, and the evaluation harness.

#include "locpriv/csv.hpp"
#include "locpriv/dataset.hpp"
#include "locpriv/errors.hpp"
#include "locpriv/eval.hpp"
#include "locpriv/fed.hpp"
#include "locpriv/ldp.hpp"
#include "locpriv/matrix.hpp"
#include "locpriv/mf.hpp"
#include "locpriv/report.hpp"
#include "locpriv/rng.hpp"
