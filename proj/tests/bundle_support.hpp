#pragma once

// A small in-memory family and the bundle fitted to it.

#include "bipar/bundle.hpp"
#include "test_support.hpp"

namespace bipar::fixture {

inline FamilyData small_family(int count = 40, int texture_size = 16) {
    FamilyConfig cfg = family_config();
    cfg.texture_size = texture_size;
    FamilyData d;
    d.landmarks = family_template().landmarks;
    d.skeleton = family_template().skeleton;
    for (int i = 0; i < count; ++i) {
        const auto& s = family_samples()[static_cast<std::size_t>(i)];
        d.meshes.push_back(s.mesh);
        d.textures.push_back(family_texture(cfg, s.texture_coeffs));
        d.eyes.push_back({eyeball_mesh(s.eyes[0]), eyeball_mesh(s.eyes[1])});
    }
    return d;
}

inline const std::shared_ptr<const ModelBundle>& small_bundle() {
    static const auto b = std::make_shared<const ModelBundle>(build_bundle(small_family(), 100, 64));
    return b;
}

}  // namespace bipar::fixture
