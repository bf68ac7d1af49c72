#!/usr/bin/env python

from setuptools import setup

install_requires = open("requirements.txt").read().strip().split("\n")
dev_requires = open("dev-requirements.txt").read().strip().split("\n")

extras = {
    "dev": dev_requires
}

setup(
    name="ps-teleport",
    version="0.1.1",
    description="Success probability x fidelity enhancement for photon-subtracted TMSV teleportation resources",
    classifiers=["Programming Language :: Python :: 3 :: Only"],
    packages=["ps_teleport"],
    install_requires=install_requires,
    extras_require=extras,
    entry_points="""
        [console_scripts]
        ps-teleport=ps_teleport:main
      """
)
