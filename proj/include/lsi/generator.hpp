#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "lsi/error.hpp"
#include "lsi/level_model.hpp"

namespace lsi {

inline constexpr int kLatentDim = 32;

/// Search genotype: a point in the generator's 32-dimensional latent space.
struct LatentVector {
    std::array<double, kLatentDim> values{};

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    bool finite() const
    {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const LatentVector&, const LatentVector&) = default;
};

struct Shape3 {
    int channels = 0;
    int height = 1;
    int width = 1;

    std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

enum class LayerKind : std::uint32_t {
    Dense = 0,
    ConvTranspose2d = 1,
    BatchNorm = 2,
    Relu = 3,
    Tanh = 4,
};

/// One layer of a generator. Which fields are meaningful depends on `kind`.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;

    // dense: weight is [out.size()][in_features], bias is [out.size()]
    int in_features = 0;
    Shape3 out{};

    // conv-transpose-2d: weight is [in_channels][out_channels][kernel][kernel], bias is [out_channels]
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int padding = 0;

    // batch-norm (inference mode)
    int channels = 0;
    float eps = 1e-5f;
    std::vector<float> running_mean, running_var;

    std::vector<float> weight, bias; // bn: weight = gamma, bias = beta
};

class GeneratorError : public Error {
public:
    using Error::Error;
};

class BadMagic : public GeneratorError {
public:
    BadMagic() : GeneratorError("generator file: bad magic or unsupported format version") {}
};

class GeneratorDecodeError : public GeneratorError {
public:
    using GeneratorError::GeneratorError;
};

class ShapeMismatch : public GeneratorError {
public:
    ShapeMismatch(int layer, const std::string& what)
        : GeneratorError("generator layer " + std::to_string(layer) + ": " + what), _layer(layer)
    {
    }
    int layer() const { return _layer; }

private:
    int _layer;
};

class UnsupportedLayerKind : public GeneratorError {
public:
    explicit UnsupportedLayerKind(std::uint32_t tag) : GeneratorError("unsupported generator layer kind " + std::to_string(tag)) {}
};

class NonFiniteActivation : public GeneratorError {
public:
    explicit NonFiniteActivation(int layer)
        : GeneratorError("non-finite activation after generator layer " + std::to_string(layer)), _layer(layer)
    {
    }
    int layer() const { return _layer; }

private:
    int _layer;
};

/// Validated, immutable layer stack mapping a latent vector to a tensor.
class GeneratorSpec {
public:
    static GeneratorSpec create(int input_dim, Shape3 output, std::vector<LayerSpec> layers)
    {
        GeneratorSpec spec;
        spec._input_dim = input_dim;
        spec._output = output;
        spec._layers = std::move(layers);
        spec.validate();
        return spec;
    }

    int input_dim() const { return _input_dim; }
    Shape3 output_shape() const { return _output; }
    const std::vector<LayerSpec>& layers() const { return _layers; }

    /// Output shape of each layer given the declared input (input_dim x 1 x 1).
    static Shape3 infer(int index, const LayerSpec& l, Shape3 in)
    {
        auto require = [index](bool ok, const std::string& what) {
            if (!ok)
                throw ShapeMismatch(index, what);
        };
        switch (l.kind) {
        case LayerKind::Dense:
            require(l.in_features > 0 && l.out.channels > 0 && l.out.height > 0 && l.out.width > 0, "non-positive dense shape");
            require(static_cast<std::size_t>(l.in_features) == in.size(), "dense input features != previous output size");
            require(l.weight.size() == l.out.size() * static_cast<std::size_t>(l.in_features), "dense weight size");
            require(l.bias.size() == l.out.size(), "dense bias size");
            return l.out;
        case LayerKind::ConvTranspose2d: {
            require(l.in_channels > 0 && l.out_channels > 0 && l.kernel > 0 && l.stride > 0 && l.padding >= 0, "bad conv-transpose shape");
            require(l.in_channels == in.channels, "conv-transpose in_channels != previous channels");
            require(l.weight.size() == static_cast<std::size_t>(l.in_channels) * l.out_channels * l.kernel * l.kernel, "conv-transpose weight size");
            require(l.bias.size() == static_cast<std::size_t>(l.out_channels), "conv-transpose bias size");
            Shape3 out{l.out_channels, (in.height - 1) * l.stride - 2 * l.padding + l.kernel,
                       (in.width - 1) * l.stride - 2 * l.padding + l.kernel};
            require(out.height > 0 && out.width > 0, "conv-transpose output is empty");
            return out;
        }
        case LayerKind::BatchNorm: {
            require(l.channels == in.channels, "batch-norm channels != previous channels");
            const auto c = static_cast<std::size_t>(l.channels);
            require(l.weight.size() == c && l.bias.size() == c && l.running_mean.size() == c && l.running_var.size() == c,
                    "batch-norm parameter size");
            require(std::all_of(l.running_var.begin(), l.running_var.end(), [](float v) { return v > 0.0f; }),
                    "batch-norm variance must be positive");
            require(l.eps >= 0.0f, "batch-norm eps must be non-negative");
            return in;
        }
        case LayerKind::Relu:
        case LayerKind::Tanh:
            return in;
        }
        throw UnsupportedLayerKind(static_cast<std::uint32_t>(l.kind));
    }

private:
    void validate() const
    {
        if (_input_dim <= 0)
            throw ShapeMismatch(-1, "input dimension must be positive");
        Shape3 shape{_input_dim, 1, 1};
        for (std::size_t i = 0; i < _layers.size(); ++i)
            shape = infer(static_cast<int>(i), _layers[i], shape);
        if (!(shape == _output))
            throw ShapeMismatch(static_cast<int>(_layers.size()) - 1, "final shape does not match declared output shape");
    }

    int _input_dim = 0;
    Shape3 _output{};
    std::vector<LayerSpec> _layers;
};

namespace detail {

    inline constexpr char kGeneratorMagic[7] = {'L', 'S', 'I', 'G', 'E', 'N', '1'};
    inline constexpr std::uint32_t kGeneratorVersion = 1;
    // refuse single parameter blocks above 256M floats
    inline constexpr std::uint64_t kMaxParams = 1ull << 28;

    class LittleEndianReader {
    public:
        explicit LittleEndianReader(std::istream& in) : _in(in) {}

        std::uint32_t u32()
        {
            unsigned char b[4];
            read(b, 4);
            return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                   (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
        }
        std::int32_t i32() { return std::bit_cast<std::int32_t>(u32()); }
        float f32() { return std::bit_cast<float>(u32()); }

        std::vector<float> floats(std::uint64_t n)
        {
            if (n > kMaxParams)
                throw GeneratorDecodeError("parameter block too large");
            std::vector<float> v(static_cast<std::size_t>(n));
            for (auto& x : v)
                x = f32();
            return v;
        }

        void read(unsigned char* dst, std::size_t n)
        {
            _in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
            if (static_cast<std::size_t>(_in.gcount()) != n)
                throw GeneratorDecodeError("generator file truncated");
        }

    private:
        std::istream& _in;
    };

    class LittleEndianWriter {
    public:
        explicit LittleEndianWriter(std::ostream& out) : _out(out) {}

        void u32(std::uint32_t v)
        {
            const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
            _out.write(b, 4);
        }
        void i32(std::int32_t v) { u32(std::bit_cast<std::uint32_t>(v)); }
        void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
        void floats(const std::vector<float>& v)
        {
            for (float x : v)
                f32(x);
        }

    private:
        std::ostream& _out;
    };

    inline std::uint64_t checked_count(int layer, std::initializer_list<std::int32_t> dims)
    {
        std::uint64_t n = 1;
        for (auto d : dims) {
            if (d <= 0)
                throw ShapeMismatch(layer, "non-positive dimension in layer record");
            n *= static_cast<std::uint64_t>(d);
            if (n > kMaxParams)
                throw ShapeMismatch(layer, "layer too large");
        }
        return n;
    }

} // namespace detail

/// Reads a generator weights file (little-endian, magic "LSIGEN1").
///
/// Layout: magic[7], u32 version, u32 input_dim, u32 out_c, u32 out_h, u32 out_w,
/// u32 layer_count, then per layer a u32 kind tag followed by its i32 shape fields and
/// f32 parameters in row-major order:
///   dense (0):          in, out_c, out_h, out_w; weight[out][in], bias[out]
///   conv-transpose (1): in_ch, out_ch, kernel, stride, padding; weight[in_ch][out_ch][k][k], bias[out_ch]
///   batch-norm (2):     channels; f32 eps; gamma[C], beta[C], running_mean[C], running_var[C]
///   relu (3), tanh (4): no payload
inline GeneratorSpec load_generator(std::istream& in)
{
    char magic[7] = {};
    in.read(magic, 7);
    if (in.gcount() != 7 || std::memcmp(magic, detail::kGeneratorMagic, 7) != 0)
        throw BadMagic();
    detail::LittleEndianReader r(in);
    if (r.u32() != detail::kGeneratorVersion)
        throw BadMagic();

    const auto input_dim = static_cast<int>(r.u32());
    Shape3 out{static_cast<int>(r.u32()), static_cast<int>(r.u32()), static_cast<int>(r.u32())};
    const std::uint32_t count = r.u32();
    if (count > 4096)
        throw GeneratorDecodeError("implausible layer count");

    std::vector<LayerSpec> layers;
    for (std::uint32_t i = 0; i < count; ++i) {
        const int idx = static_cast<int>(i);
        const std::uint32_t tag = r.u32();
        LayerSpec l;
        switch (tag) {
        case 0: {
            l.kind = LayerKind::Dense;
            l.in_features = r.i32();
            l.out = {r.i32(), r.i32(), r.i32()};
            const auto n_out = detail::checked_count(idx, {l.out.channels, l.out.height, l.out.width});
            const auto n_w = detail::checked_count(idx, {l.in_features, static_cast<std::int32_t>(n_out)});
            l.weight = r.floats(n_w);
            l.bias = r.floats(n_out);
            break;
        }
        case 1: {
            l.kind = LayerKind::ConvTranspose2d;
            l.in_channels = r.i32();
            l.out_channels = r.i32();
            l.kernel = r.i32();
            l.stride = r.i32();
            l.padding = r.i32();
            l.weight = r.floats(detail::checked_count(idx, {l.in_channels, l.out_channels, l.kernel, l.kernel}));
            l.bias = r.floats(detail::checked_count(idx, {l.out_channels}));
            break;
        }
        case 2: {
            l.kind = LayerKind::BatchNorm;
            l.channels = r.i32();
            l.eps = r.f32();
            const auto c = detail::checked_count(idx, {l.channels});
            l.weight = r.floats(c);
            l.bias = r.floats(c);
            l.running_mean = r.floats(c);
            l.running_var = r.floats(c);
            break;
        }
        case 3:
            l.kind = LayerKind::Relu;
            break;
        case 4:
            l.kind = LayerKind::Tanh;
            break;
        default:
            throw UnsupportedLayerKind(tag);
        }
        layers.push_back(std::move(l));
    }
    return GeneratorSpec::create(input_dim, out, std::move(layers));
}

inline GeneratorSpec load_generator_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw GeneratorError("cannot open generator file '" + path + "'");
    return load_generator(in);
}

inline void save_generator(std::ostream& out, const GeneratorSpec& spec)
{
    out.write(detail::kGeneratorMagic, 7);
    detail::LittleEndianWriter w(out);
    w.u32(detail::kGeneratorVersion);
    w.u32(static_cast<std::uint32_t>(spec.input_dim()));
    w.u32(static_cast<std::uint32_t>(spec.output_shape().channels));
    w.u32(static_cast<std::uint32_t>(spec.output_shape().height));
    w.u32(static_cast<std::uint32_t>(spec.output_shape().width));
    w.u32(static_cast<std::uint32_t>(spec.layers().size()));
    for (const auto& l : spec.layers()) {
        w.u32(static_cast<std::uint32_t>(l.kind));
        switch (l.kind) {
        case LayerKind::Dense:
            w.i32(l.in_features);
            w.i32(l.out.channels);
            w.i32(l.out.height);
            w.i32(l.out.width);
            w.floats(l.weight);
            w.floats(l.bias);
            break;
        case LayerKind::ConvTranspose2d:
            w.i32(l.in_channels);
            w.i32(l.out_channels);
            w.i32(l.kernel);
            w.i32(l.stride);
            w.i32(l.padding);
            w.floats(l.weight);
            w.floats(l.bias);
            break;
        case LayerKind::BatchNorm:
            w.i32(l.channels);
            w.f32(l.eps);
            w.floats(l.weight);
            w.floats(l.bias);
            w.floats(l.running_mean);
            w.floats(l.running_var);
            break;
        case LayerKind::Relu:
        case LayerKind::Tanh:
            break;
        }
    }
}

/// Inference-mode forward pass. Activations are carried in double precision.
inline Tensor3 forward(const GeneratorSpec& spec, const LatentVector& z)
{
    if (spec.input_dim() != kLatentDim)
        throw ShapeMismatch(-1, "generator input dimension is not 32");

    Shape3 shape{kLatentDim, 1, 1};
    Tensor3 x(kLatentDim, 1, 1);
    std::copy(z.values.begin(), z.values.end(), x.data().begin());

    const auto& layers = spec.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const LayerSpec& l = layers[li];
        switch (l.kind) {
        case LayerKind::Dense: {
            Tensor3 y(l.out.channels, l.out.height, l.out.width);
            const std::size_t n_in = x.size();
            for (std::size_t o = 0; o < y.size(); ++o) {
                double acc = l.bias[o];
                const float* row = l.weight.data() + o * n_in;
                for (std::size_t i = 0; i < n_in; ++i)
                    acc += static_cast<double>(row[i]) * x.data()[i];
                y.data()[o] = acc;
            }
            x = std::move(y);
            break;
        }
        case LayerKind::ConvTranspose2d: {
            Shape3 out = GeneratorSpec::infer(static_cast<int>(li), l, shape);
            Tensor3 y(out.channels, out.height, out.width);
            for (int oc = 0; oc < out.channels; ++oc)
                for (int oy = 0; oy < out.height; ++oy)
                    for (int ox = 0; ox < out.width; ++ox)
                        y(oc, oy, ox) = l.bias[static_cast<std::size_t>(oc)];
            const int k = l.kernel;
            for (int ic = 0; ic < shape.channels; ++ic)
                for (int iy = 0; iy < shape.height; ++iy)
                    for (int ix = 0; ix < shape.width; ++ix) {
                        const double v = x(ic, iy, ix);
                        if (v == 0.0)
                            continue;
                        for (int oc = 0; oc < out.channels; ++oc) {
                            const float* w = l.weight.data() + (static_cast<std::size_t>(ic) * out.channels + oc) * k * k;
                            for (int ky = 0; ky < k; ++ky) {
                                const int oy = iy * l.stride - l.padding + ky;
                                if (oy < 0 || oy >= out.height)
                                    continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ox = ix * l.stride - l.padding + kx;
                                    if (ox < 0 || ox >= out.width)
                                        continue;
                                    y(oc, oy, ox) += v * static_cast<double>(w[ky * k + kx]);
                                }
                            }
                        }
                    }
            x = std::move(y);
            break;
        }
        case LayerKind::BatchNorm: {
            for (int c = 0; c < shape.channels; ++c) {
                const auto ci = static_cast<std::size_t>(c);
                const double scale = l.weight[ci] / std::sqrt(static_cast<double>(l.running_var[ci]) + l.eps);
                const double shift = l.bias[ci] - l.running_mean[ci] * scale;
                for (int yy = 0; yy < shape.height; ++yy)
                    for (int xx = 0; xx < shape.width; ++xx)
                        x(c, yy, xx) = x(c, yy, xx) * scale + shift;
            }
            break;
        }
        case LayerKind::Relu:
            for (auto& v : x.data())
                v = std::max(v, 0.0);
            break;
        case LayerKind::Tanh:
            for (auto& v : x.data())
                v = std::tanh(v);
            break;
        }
        shape = {x.channels(), x.height(), x.width()};
        for (double v : x.data())
            if (!std::isfinite(v))
                throw NonFiniteActivation(static_cast<int>(li));
    }
    return x;
}

inline TileGrid decode(const GeneratorSpec& spec, const LatentVector& z)
{
    if (!(spec.output_shape() == Shape3{kNumTiles, kCanvasSize, kCanvasSize}))
        throw ShapeMismatch(static_cast<int>(spec.layers().size()) - 1, "decode needs a 17x64x64 generator");
    return crop_output(forward(spec, z));
}

/// Deterministic procedural stand-in for a trained generator.
///
/// Per column c: genes z[c%8] set terrain elevation, z[8+c%8] carve gaps, z[16+c%8] place
/// enemies; z[24..31] toggle eight 3-tile sky platforms at row 8 and z[31] adds coins above them.
inline TileGrid synthetic_decode(const LatentVector& z, const TileAlphabet& alphabet = default_alphabet())
{
    const int empty = alphabet.first_of(TileClass::Empty);
    const int solid = alphabet.first_of(TileClass::Solid);
    const int breakable = alphabet.first_of(TileClass::Breakable);
    const int coin = alphabet.first_of(TileClass::Coin);
    const int goomba = alphabet.first_of(TileClass::EnemyGoomba);
    const int koopa = alphabet.first_of(TileClass::EnemyKoopa);

    TileGrid g = TileGrid::filled(empty);
    auto set = [&g](int r, int c, int idx) { g(r, c) = static_cast<std::uint8_t>(idx); };

    for (int c = 0; c < kSceneCols; ++c) {
        const auto j = static_cast<std::size_t>(c % 8);
        if (std::tanh(z[8 + j]) > 0.4)
            continue; // gap column
        const int elevation = std::clamp(static_cast<int>(std::lround(3.0 * (1.0 + std::tanh(z[j])))), 0, 6);
        set(14, c, solid);
        set(15, c, solid);
        for (int e = 0; e < elevation; ++e)
            set(13 - e, c, solid);
        const double threshold = 0.6 - 0.05 * ((c / 8) % 4);
        if (std::tanh(z[16 + j]) > threshold)
            set(13 - elevation, c, c % 4 == 3 ? koopa : goomba);
    }
    for (int k = 0; k < 8; ++k) {
        if (std::tanh(z[24 + static_cast<std::size_t>(k)]) <= 0.3)
            continue;
        for (int c = 7 * k; c < 7 * k + 3; ++c)
            set(8, c, breakable);
        if (z[31] > 0.0)
            set(7, 7 * k + 1, coin);
    }
    return g;
}

/// Either a loaded generator or the synthetic decoder, behind one call operator.
class SceneDecoder {
public:
    static SceneDecoder synthetic(const TileAlphabet& alphabet = default_alphabet())
    {
        SceneDecoder d;
        d._alphabet = std::make_shared<TileAlphabet>(alphabet);
        return d;
    }

    static SceneDecoder from_spec(GeneratorSpec spec, const TileAlphabet& alphabet = default_alphabet())
    {
        if (!(spec.output_shape() == Shape3{kNumTiles, kCanvasSize, kCanvasSize}))
            throw ShapeMismatch(static_cast<int>(spec.layers().size()) - 1, "decode needs a 17x64x64 generator");
        SceneDecoder d;
        d._spec = std::make_shared<const GeneratorSpec>(std::move(spec));
        d._alphabet = std::make_shared<TileAlphabet>(alphabet);
        return d;
    }

    /// "synthetic" or a path to a weights file.
    static SceneDecoder from_source(const std::string& source, const TileAlphabet& alphabet = default_alphabet())
    {
        if (source == "synthetic")
            return synthetic(alphabet);
        return from_spec(load_generator_file(source), alphabet);
    }

    bool is_synthetic() const { return !_spec; }
    const TileAlphabet& alphabet() const { return *_alphabet; }

    TileGrid operator()(const LatentVector& z) const
    {
        return _spec ? decode(*_spec, z) : synthetic_decode(z, *_alphabet);
    }

private:
    SceneDecoder() = default;
    std::shared_ptr<const GeneratorSpec> _spec;
    std::shared_ptr<const TileAlphabet> _alphabet;
};

} // namespace lsi
