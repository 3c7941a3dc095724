#pragma once

// Umbrella header: the whole library in one include.

#include "agents.hpp"
#include "bytes.hpp"
#include "credentials.hpp"
#include "crypto.hpp"
#include "errors.hpp"
#include "fedlearn.hpp"
#include "harness.hpp"
#include "http_transport.hpp"
#include "identity.hpp"
#include "registry.hpp"
#include "rng.hpp"
#include "transport.hpp"
