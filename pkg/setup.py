#!/usr/bin/env python
# -*- coding: utf-8 -*-

from setuptools import setup, find_packages

__version__ = '0.1'

requirements = [
    'numpy',
    'scipy',
    'astropy>=4.1',
    'matplotlib',
    'statsmodels',
    'tqdm',
    'pyyaml',
]

setup(
    name='dmacpipe',
    version=__version__,
    description='Dynamic Mode Adaptive Control simulator',
    install_requires=requirements,
    packages=['dmac'],
    include_package_data=True,
    entry_points={
        'console_scripts': [
            'dmac = dmac.cli:main',
        ],
    },
    extras_require={
        "test": [
            'pytest',
        ],
    },
)
