#pragma once

#include <stdexcept>
#include <string>

namespace ctforge {

// Base class for all toolkit errors. Subclasses exist so callers can
// distinguish failure modes without string matching.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// volume-core
class OutOfBounds : public Error {
public:
    using Error::Error;
};

// dicom-io
class MalformedFile : public Error {
public:
    using Error::Error;
};

class MissingTag : public Error {
public:
    MissingTag(unsigned group, unsigned element);
    unsigned group() const noexcept { return group_; }
    unsigned element() const noexcept { return element_; }

private:
    unsigned group_;
    unsigned element_;
};

class UnsupportedTransferSyntax : public Error {
public:
    using Error::Error;
};

class InconsistentSeries : public Error {
public:
    using Error::Error;
};

class GapInSeries : public Error {
public:
    using Error::Error;
};

class HeaderMismatch : public Error {
public:
    using Error::Error;
};

// preprocess
class DegenerateExtent : public Error {
public:
    using Error::Error;
};

class MissingContext : public Error {
public:
    using Error::Error;
};

// inpaint-gan
class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class NonFiniteLoss : public Error {
public:
    using Error::Error;
};

class TooSmall : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

// tamper-pipeline
class NoCandidates : public Error {
public:
    using Error::Error;
};

class GeneratorFailure : public Error {
public:
    using Error::Error;
};

// phantom-gen
class SpecOutOfBounds : public Error {
public:
    using Error::Error;
};

// eval
class MissingGroundTruth : public Error {
public:
    using Error::Error;
};

// generic I/O and networking
class IoError : public Error {
public:
    using Error::Error;
};

class NetError : public Error {
public:
    using Error::Error;
};

}  // namespace ctforge
