#pragma once

#include "synthctl/core.hpp"
#include "synthctl/signals.hpp"
#include "synthctl/synthesis.hpp"
#include "synthctl/sdp.hpp"
#include "synthctl/verify.hpp"
#include "synthctl/lmi.hpp"
#include "synthctl/informativity.hpp"
#include "synthctl/json_io.hpp"
#include "synthctl/batch_reactor.hpp"
