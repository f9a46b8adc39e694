#!/usr/bin/env python3
"""
SSC Checkpoint Inspection Tool
Verifies the layout and contents of a saved ParameterBundle checkpoint.
"""

import argparse
import sys
from typing import Dict, List, Optional

import torch

from ssc_errors import CheckpointError, ConfigurationError
from ssc_model import BOB_TO_EVE, CHECKPOINT_FORMAT_VERSION, COLLECTIONS, ModelConfig, init_params, read_checkpoint


class CheckpointInspector:
    def __init__(self, checkpoint_path: str):
        self.checkpoint_path = checkpoint_path
        self.payload: Optional[dict] = None
        self.model_config: Optional[ModelConfig] = None
        self.issues: List[str] = []
        self.warnings: List[str] = []
        self.stats: Dict[str, dict] = {}

    def _grouped(self) -> Dict[str, Dict[str, torch.Tensor]]:
        grouped: Dict[str, Dict[str, torch.Tensor]] = {}
        for key, value in self.payload["state"].items():
            name, _, tensor_key = key.partition("/")
            grouped.setdefault(name, {})[tensor_key] = value
        return grouped

    def verify_container(self) -> bool:
        """Verify the file loads and carries the expected top-level keys"""
        print("\n=== Verifying Checkpoint Container ===")

        try:
            self.payload = read_checkpoint(self.checkpoint_path)
        except CheckpointError as e:
            print(f"✗ {e}")
            self.issues.append(str(e))
            return False

        print(f"✓ Checkpoint readable: {self.checkpoint_path}")
        version = self.payload.get("format_version")
        if version == CHECKPOINT_FORMAT_VERSION:
            print(f"✓ Format version {version}")
        else:
            print(f"⚠  Format version {version!r} (expected {CHECKPOINT_FORMAT_VERSION})")
            self.warnings.append(f"Unexpected format_version {version!r}")
        return True

    def verify_config(self) -> bool:
        """Verify the stored ModelConfig"""
        print("\n=== Verifying Model Config ===")

        try:
            self.model_config = ModelConfig(**self.payload["model_config"])
        except (TypeError, ConfigurationError) as e:
            print(f"✗ Invalid model config: {e}")
            self.issues.append(f"Invalid model config: {e}")
            return False

        cfg = self.model_config
        print(f"✓ Model config valid")
        print(f"  vocab={cfg.vocab_size} V={cfg.d_model} N={cfg.symbol_dim} L={cfg.max_len}")
        print(f"  layers={cfg.layers} heads={cfg.heads} symbols/sentence={cfg.symbols_per_sentence}")
        self.stats["config"] = {"vocab_size": cfg.vocab_size, "d_model": cfg.d_model, "max_len": cfg.max_len}
        return True

    def verify_collections(self) -> bool:
        """Verify every collection is present with the layout its config implies"""
        print("\n=== Verifying Parameter Collections ===")

        grouped = self._grouped()
        reference = init_params(self.model_config, seed=0) if self.model_config else None
        all_ok = True
        counts = {}

        for name in COLLECTIONS:
            tensors = grouped.get(name)
            if not tensors:
                print(f"✗ {name}: missing")
                self.issues.append(f"Missing collection: {name}")
                all_ok = False
                continue

            count = sum(t.numel() for t in tensors.values())
            counts[name] = count
            if reference is not None:
                expected = reference.collections[name].state_dict()
                if set(expected) != set(tensors) or any(expected[k].shape != tensors[k].shape for k in expected):
                    print(f"✗ {name}: layout does not match the stored config")
                    self.issues.append(f"Layout mismatch in collection {name}")
                    all_ok = False
                    continue
            print(f"✓ {name}: {len(tensors)} tensors, {count:,} values")

        extra = sorted(set(grouped) - set(COLLECTIONS))
        if extra:
            print(f"⚠  Unknown collections: {', '.join(extra)}")
            self.warnings.append(f"Unknown collections: {extra}")

        self.stats["collections"] = counts
        return all_ok

    def verify_values(self) -> bool:
        """Verify all stored tensors are finite"""
        print("\n=== Verifying Parameter Values ===")

        bad = [
            key
            for key, value in self.payload["state"].items()
            if value.is_floating_point() and not torch.isfinite(value).all()
        ]
        if bad:
            for key in bad[:10]:
                print(f"✗ Non-finite values in {key}")
            self.issues.append(f"{len(bad)} tensors contain NaN/inf")
            return False

        print(f"✓ All {len(self.payload['state'])} tensors finite")
        return True

    def verify_transfer_compatibility(self) -> bool:
        """Verify Bob's decoders can be loaded into Eve's slots"""
        print("\n=== Verifying Bob/Eve Decoder Compatibility ===")

        grouped = self._grouped()
        all_ok = True
        for bob, eve in BOB_TO_EVE.items():
            bob_shapes = {k: tuple(v.shape) for k, v in grouped.get(bob, {}).items()}
            eve_shapes = {k: tuple(v.shape) for k, v in grouped.get(eve, {}).items()}
            if bob_shapes and bob_shapes == eve_shapes:
                print(f"✓ {bob} -> {eve} shape-compatible")
            else:
                print(f"✗ {bob} and {eve} differ in shape")
                self.issues.append(f"{bob} and {eve} are not shape-compatible")
                all_ok = False
        return all_ok

    def verify_frozen_flags(self) -> bool:
        """Report frozen collections"""
        print("\n=== Verifying Freeze Flags ===")

        frozen = list(self.payload.get("frozen", []))
        unknown = [name for name in frozen if name not in COLLECTIONS]
        if unknown:
            print(f"✗ Unknown frozen collections: {', '.join(unknown)}")
            self.issues.append(f"Unknown frozen collections: {unknown}")
            return False

        print(f"✓ Frozen: {', '.join(frozen) if frozen else 'none'}")
        self.stats["frozen"] = {"names": frozen}
        return True

    def generate_report(self) -> bool:
        """Generate inspection report"""
        print("\n" + "=" * 70)
        print("Inspection Summary")
        print("=" * 70)

        if "collections" in self.stats:
            total = sum(self.stats["collections"].values())
            print(f"\n📊 Parameters: {total:,} across {len(self.stats['collections'])} collections")
            for name, count in self.stats["collections"].items():
                print(f"  {name}: {count:,}")

        if self.issues:
            print(f"\n❌ Critical Issues Found: {len(self.issues)}")
            for issue in self.issues:
                print(f"  - {issue}")
        else:
            print(f"\n✅ No critical issues found")

        if self.warnings:
            print(f"\n⚠️  Warnings: {len(self.warnings)}")
            for warning in self.warnings:
                print(f"  - {warning}")

        print("\n" + "=" * 70)
        print("✅ Checkpoint inspection PASSED" if not self.issues else "❌ Checkpoint inspection FAILED")
        print("=" * 70)

        return len(self.issues) == 0

    def run(self) -> bool:
        """Run all inspection checks"""
        print("=" * 70)
        print("SSC Checkpoint Inspection Tool")
        print("=" * 70)
        print(f"\nInspecting: {self.checkpoint_path}")

        if self.verify_container():
            self.verify_config()
            self.verify_collections()
            self.verify_values()
            self.verify_transfer_compatibility()
            self.verify_frozen_flags()

        return self.generate_report()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Inspect an SSC parameter-bundle checkpoint")
    parser.add_argument("checkpoint", help="Path to a .pt checkpoint")
    args = parser.parse_args(argv)
    return 0 if CheckpointInspector(args.checkpoint).run() else 1


if __name__ == "__main__":
    sys.exit(main())
