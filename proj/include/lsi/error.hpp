#pragma once

#include <stdexcept>
#include <string>

namespace lsi {

/// Base for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace lsi
